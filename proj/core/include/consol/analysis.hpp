#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consol/evaluation.hpp"

namespace consol::analysis {

struct MeanSe {
  double mean = 0.0;
  /// Sample SD (n-1 denominator) over sqrt(n); absent for a single value.
  std::optional<double> se;
};

MeanSe mean_se(std::span<const double> values);

struct PairedT {
  double t = 0.0;
  int df = 0;
  double p_two_sided = 1.0;
};

/// Paired t-test on d = b - a. Zero variance of d is a degenerate error.
PairedT paired_t(std::span<const double> a, std::span<const double> b);

/// Two-sided tail probability P(|T| >= |t|) of Student's t with `df` degrees of
/// freedom, by adaptive Gauss-Kronrod integration of the density (absolute
/// tolerance 1e-12 on the tail mass).
double student_t_two_sided_p(double t, int df);

/// Product-moment correlation; zero variance in either input is degenerate.
double pearson(std::span<const double> x, std::span<const double> y);

struct CEStats {
  int epoch = 0;
  double mean_ce = 0.0;
  double median_ce = 0.0;  // central-pair average for even counts
  double p90_ce = 0.0;     // nearest rank: the ceil(0.9 n)-th order statistic
  std::size_t token_count = 0;

  friend bool operator==(const CEStats&, const CEStats&) = default;
};

CEStats ce_stats(std::span<const double> token_ces, int epoch);

struct EpochPoint {
  int epoch = 0;
  double fail_rate = 0.0;  // percent
  std::optional<CEStats> ce;
};

/// Epoch with the lowest fail rate; ties go to the earliest epoch.
int select_epoch(std::span<const EpochPoint> sweep);

/// (v - min) / (max - min); a constant curve is degenerate.
std::vector<double> normalize_curve(std::span<const double> values);

/// (value - floor) / (ceiling - floor); ceiling <= floor is degenerate.
double gap_recovery(double floor, double ceiling, double value);

/// Rounds half away from zero at one decimal, tolerant of binary
/// representation error (74.55 -> 74.6).
double round1(double value);
std::string format1(double value);

// --- Retention tables -------------------------------------------------------

enum class Column { kSemantic, kProcedural, kEpisodic, kOverall };
inline constexpr Column kColumns[] = {Column::kSemantic, Column::kProcedural, Column::kEpisodic,
                                      Column::kOverall};
std::string_view to_string(Column column);

const evaluation::Cell& cell_for(const evaluation::ConversationScore& score, Column column);

struct RetentionCell {
  std::optional<MeanSe> value;  // absent when no conversation had a judgeable question
  int n = 0;                    // conversations (unweighted) or questions (pooled) contributing
};

struct RetentionRow {
  std::string condition;
  bool present = false;
  std::array<RetentionCell, 4> cells;
};

/// Unweighted: each cell is mean +/- SE over per-conversation accuracies.
RetentionRow unweighted_row(const std::string& condition,
                            std::span<const evaluation::ConversationScore> scores);
/// Pooled: each cell is total pass / total judged across conversations (no SE).
RetentionRow pooled_row(const std::string& condition,
                        std::span<const evaluation::ConversationScore> scores);

/// Judged scores for one evaluated condition, or absent.
struct ConditionScores {
  evaluation::Condition condition;
  bool present = false;
  std::vector<evaluation::ConversationScore> per_conversation;
};

struct SweepEpoch {
  int epoch = 0;
  std::optional<double> fail_rate;
  std::optional<CEStats> ce;
};

struct AnalysisInputs {
  /// Display order: no_context, compaction cycles, consolidated, full_context.
  std::vector<ConditionScores> conditions;
  /// Pooled per-token CE values per epoch, from trainer logs (may be empty).
  std::vector<std::pair<int, std::vector<double>>> ce_by_epoch;
};

struct Correlation {
  std::optional<double> r;
  std::string note;
};

struct AnalysisResult {
  std::vector<RetentionRow> unweighted;
  std::vector<RetentionRow> pooled;
  std::vector<ConditionScores> conditions;
  std::vector<SweepEpoch> sweep;
  std::optional<int> selected_epoch;
  std::optional<int> main_epoch;       // consolidated epoch used in the main table
  std::optional<int> final_cycle;      // compaction cycle compared against it
  std::optional<PairedT> compaction_vs_consolidated;
  std::string t_test_note;
  Correlation median_ce_vs_fail;
  Correlation mean_ce_vs_fail;
  std::optional<double> gap_recovered;
  std::string gap_note;
};

AnalysisResult analyze(const AnalysisInputs& inputs);

json to_json(const AnalysisResult& result);

/// Writes retention_table.{csv,md}, retention_pooled.csv, per_conversation.csv,
/// epoch_sweep.csv, degradation.csv and summary.md into `dir`.
void emit_report(const AnalysisResult& result, const std::filesystem::path& dir);

}  // namespace consol::analysis
