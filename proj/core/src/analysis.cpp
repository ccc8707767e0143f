#include "consol/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "consol/error.hpp"

namespace consol::analysis {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sum of squared deviations from `m`.
double centered_ss(std::span<const double> v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss;
}

// 15-point Kronrod rule with its embedded 7-point Gauss rule.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
double gauss_kronrod(const F& f, double a, double b, double tol, int depth) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double sum = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  kronrod *= h;
  gauss *= h;
  if (std::abs(kronrod - gauss) <= tol || depth >= 40) return kronrod;
  return gauss_kronrod(f, a, c, tol / 2, depth + 1) + gauss_kronrod(f, c, b, tol / 2, depth + 1);
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kContract,
                fmt::format("{}: inputs differ in length ({} vs {})", op, a.size(), b.size()));
  }
  if (a.size() < 2) {
    throw Error(ErrorKind::kContract, fmt::format("{}: need at least two pairs", op));
  }
}

}  // namespace

MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kContract, "mean_se: empty input");
  MeanSe out;
  out.mean = mean_of(values);
  if (values.size() >= 2) {
    const double n = static_cast<double>(values.size());
    const double sd = std::sqrt(centered_ss(values, out.mean) / (n - 1));
    out.se = sd / std::sqrt(n);
  }
  return out;
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw Error(ErrorKind::kContract, "student_t_two_sided_p: df must be >= 1");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  const double nu = df;
  const double log_c =
      std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi);
  auto density = [&](double x) { return std::exp(log_c - (nu + 1) / 2 * std::log1p(x * x / nu)); };
  const double at = std::abs(t);
  if (std::isinf(at)) return 0.0;
  // Upper tail P(T > at) = int_at^1 f(x) dx (when at < 1) + int_1^inf f(x) dx,
  // with the infinite piece mapped to (0, 1/max(at,1)] via x = 1/s.
  const double split = std::max(at, 1.0);
  auto mapped = [&](double s) {
    if (s <= 0.0) return 0.0;
    return density(1.0 / s) / (s * s);
  };
  constexpr double kTol = 1e-13;
  double tail = gauss_kronrod(mapped, 0.0, 1.0 / split, kTol, 0);
  if (at < 1.0) tail += gauss_kronrod(density, at, 1.0, kTol, 0);
  return std::min(1.0, 2.0 * tail);
}

PairedT paired_t(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "paired_t");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const double n = static_cast<double>(d.size());
  const double md = mean_of(d);
  const double var = centered_ss(d, md) / (n - 1);
  // Variance at rounding-noise level of the mean counts as zero.
  if (!(var > 1e-24 * std::max(1.0, md * md))) {
    throw Error(ErrorKind::kDegenerate, "paired_t: differences have zero variance");
  }
  PairedT out;
  out.df = static_cast<int>(d.size()) - 1;
  out.t = md / (std::sqrt(var) / std::sqrt(n));
  out.p_two_sided = student_t_two_sided_p(out.t, out.df);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, "pearson");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
  const double sxx = centered_ss(x, mx);
  const double syy = centered_ss(y, my);
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "pearson: input has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CEStats ce_stats(std::span<const double> token_ces, int epoch) {
  if (token_ces.empty()) throw Error(ErrorKind::kContract, "ce_stats: empty input");
  std::vector<double> sorted(token_ces.begin(), token_ces.end());
  for (double v : sorted) {
    if (!(v >= 0.0)) throw Error(ErrorKind::kContract, "ce_stats: negative or NaN CE value");
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  CEStats s;
  s.epoch = epoch;
  s.token_count = n;
  s.mean_ce = mean_of(sorted);
  s.median_ce = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const std::size_t rank = (9 * n + 9) / 10;  // ceil(0.9 n), 1-based
  s.p90_ce = sorted[rank - 1];
  return s;
}

int select_epoch(std::span<const EpochPoint> sweep) {
  if (sweep.empty()) throw Error(ErrorKind::kContract, "select_epoch: empty sweep");
  const EpochPoint* best = &sweep.front();
  for (const auto& p : sweep) {
    if (p.fail_rate < best->fail_rate ||
        (p.fail_rate == best->fail_rate && p.epoch < best->epoch)) {
      best = &p;
    }
  }
  return best->epoch;
}

std::vector<double> normalize_curve(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kContract, "normalize_curve: empty input");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) throw Error(ErrorKind::kDegenerate, "normalize_curve: constant curve");
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - min) / range);
  return out;
}

double gap_recovery(double floor, double ceiling, double value) {
  if (!(ceiling > floor)) {
    throw Error(ErrorKind::kDegenerate, "gap_recovery: ceiling must exceed floor");
  }
  return (value - floor) / (ceiling - floor);
}

double round1(double value) {
  const double scaled = std::abs(value) * 10.0;
  const double r = std::floor(scaled + 0.5 + 1e-9) / 10.0;
  return std::copysign(r, value);
}

std::string format1(double value) {
  double r = round1(value);
  if (r == 0.0) r = 0.0;  // no "-0.0"
  return fmt::format("{:.1f}", r);
}

// --- Retention tables -------------------------------------------------------

std::string_view to_string(Column column) {
  switch (column) {
    case Column::kSemantic: return "semantic";
    case Column::kProcedural: return "procedural";
    case Column::kEpisodic: return "episodic";
    case Column::kOverall: return "overall";
  }
  return "overall";
}

const evaluation::Cell& cell_for(const evaluation::ConversationScore& score, Column column) {
  static const evaluation::Cell kEmpty{};
  switch (column) {
    case Column::kSemantic:
    case Column::kProcedural:
    case Column::kEpisodic: {
      auto type = column == Column::kSemantic     ? MemoryType::kSemantic
                  : column == Column::kProcedural ? MemoryType::kProcedural
                                                  : MemoryType::kEpisodic;
      auto it = score.by_type.find(type);
      return it == score.by_type.end() ? kEmpty : it->second;
    }
    case Column::kOverall: return score.overall;
  }
  return kEmpty;
}

RetentionRow unweighted_row(const std::string& condition,
                            std::span<const evaluation::ConversationScore> scores) {
  RetentionRow row;
  row.condition = condition;
  row.present = !scores.empty();
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<double> values;
    for (const auto& s : scores) {
      if (auto acc = cell_for(s, kColumns[c]).accuracy()) values.push_back(*acc);
    }
    row.cells[c].n = static_cast<int>(values.size());
    if (!values.empty()) row.cells[c].value = mean_se(values);
  }
  return row;
}

RetentionRow pooled_row(const std::string& condition,
                        std::span<const evaluation::ConversationScore> scores) {
  RetentionRow row;
  row.condition = condition;
  row.present = !scores.empty();
  for (std::size_t c = 0; c < 4; ++c) {
    evaluation::Cell total;
    for (const auto& s : scores) {
      const auto& cell = cell_for(s, kColumns[c]);
      total.pass += cell.pass;
      total.fail += cell.fail;
      total.error += cell.error;
    }
    row.cells[c].n = total.judged();
    if (auto acc = total.accuracy()) row.cells[c].value = MeanSe{*acc, std::nullopt};
  }
  return row;
}

// --- Whole-run analysis -----------------------------------------------------

namespace {

using evaluation::Condition;

std::optional<double> overall_mean(const ConditionScores& cs) {
  if (!cs.present) return std::nullopt;
  auto row = unweighted_row(cs.condition.name(), cs.per_conversation);
  const auto& cell = row.cells[3];
  if (!cell.value) return std::nullopt;
  return cell.value->mean;
}

const ConditionScores* find_condition(const std::vector<ConditionScores>& all,
                                      const Condition& c) {
  for (const auto& cs : all) {
    if (cs.condition == c && cs.present) return &cs;
  }
  return nullptr;
}

Correlation correlate(const std::vector<SweepEpoch>& sweep, bool use_median) {
  std::vector<double> ce, fail;
  for (const auto& e : sweep) {
    if (e.fail_rate && e.ce) {
      fail.push_back(*e.fail_rate);
      ce.push_back(use_median ? e.ce->median_ce : e.ce->mean_ce);
    }
  }
  Correlation out;
  if (fail.size() < 2) {
    out.note = "fewer than two epochs with both fail rate and CE";
    return out;
  }
  try {
    out.r = pearson(ce, fail);
  } catch (const Error& e) {
    out.note = e.what();
  }
  return out;
}

}  // namespace

AnalysisResult analyze(const AnalysisInputs& inputs) {
  AnalysisResult result;
  result.conditions = inputs.conditions;
  for (const auto& cs : inputs.conditions) {
    if (cs.condition.kind == Condition::Kind::kConsolidated) continue;
    result.unweighted.push_back(unweighted_row(cs.condition.name(), cs.per_conversation));
    result.pooled.push_back(pooled_row(cs.condition.name(), cs.per_conversation));
    result.unweighted.back().present = cs.present;
    result.pooled.back().present = cs.present;
  }

  // Epoch sweep over every consolidated epoch that was evaluated or logged.
  std::map<int, SweepEpoch> sweep;
  for (const auto& cs : inputs.conditions) {
    if (cs.condition.kind != Condition::Kind::kConsolidated || !cs.present) continue;
    auto& e = sweep[cs.condition.index];
    e.epoch = cs.condition.index;
    if (auto m = overall_mean(cs)) e.fail_rate = 100.0 - *m;
  }
  for (const auto& [epoch, values] : inputs.ce_by_epoch) {
    if (values.empty()) continue;
    auto& e = sweep[epoch];
    e.epoch = epoch;
    e.ce = ce_stats(values, epoch);
  }
  std::vector<EpochPoint> points;
  for (const auto& [epoch, e] : sweep) {
    result.sweep.push_back(e);
    if (e.fail_rate) points.push_back(EpochPoint{epoch, *e.fail_rate, e.ce});
  }
  if (!points.empty()) result.selected_epoch = select_epoch(points);
  result.main_epoch = result.selected_epoch;

  // Consolidated row in the main tables: the selected epoch.
  const ConditionScores* consolidated = nullptr;
  if (result.main_epoch) {
    consolidated = find_condition(inputs.conditions, Condition::consolidated(*result.main_epoch));
  }
  auto insert_at = [&](std::vector<RetentionRow>& rows, RetentionRow row) {
    // Keep full_context last.
    auto it = std::find_if(rows.begin(), rows.end(), [](const RetentionRow& r) {
      return r.condition == "full_context";
    });
    rows.insert(it, std::move(row));
  };
  if (consolidated != nullptr) {
    insert_at(result.unweighted, unweighted_row(consolidated->condition.name(),
                                                consolidated->per_conversation));
    insert_at(result.pooled, pooled_row(consolidated->condition.name(),
                                        consolidated->per_conversation));
  } else {
    RetentionRow absent;
    absent.condition = "consolidated";
    insert_at(result.unweighted, absent);
    insert_at(result.pooled, absent);
  }

  // Paired t-test: final compaction cycle vs consolidated, per conversation.
  const ConditionScores* compaction = nullptr;
  for (const auto& cs : inputs.conditions) {
    if (cs.present && cs.condition.kind == Condition::Kind::kCompaction &&
        (compaction == nullptr || cs.condition.index > compaction->condition.index)) {
      compaction = &cs;
    }
  }
  if (compaction != nullptr) result.final_cycle = compaction->condition.index;
  if (compaction == nullptr || consolidated == nullptr) {
    result.t_test_note = "compaction or consolidated condition absent";
  } else {
    std::map<std::string, double> a_by, b_by;
    for (const auto& s : compaction->per_conversation) {
      if (auto acc = s.overall.accuracy()) a_by[s.conversation_id] = *acc;
    }
    for (const auto& s : consolidated->per_conversation) {
      if (auto acc = s.overall.accuracy()) b_by[s.conversation_id] = *acc;
    }
    std::vector<double> a, b;
    for (const auto& [id, v] : a_by) {
      if (auto it = b_by.find(id); it != b_by.end()) {
        a.push_back(v);
        b.push_back(it->second);
      }
    }
    if (a.size() < 2) {
      result.t_test_note = fmt::format("needs at least two paired conversations, have {}", a.size());
    } else {
      try {
        result.compaction_vs_consolidated = paired_t(a, b);
      } catch (const Error& e) {
        result.t_test_note = e.what();
      }
    }
  }

  result.median_ce_vs_fail = correlate(result.sweep, true);
  result.mean_ce_vs_fail = correlate(result.sweep, false);

  auto floor = [&]() -> std::optional<double> {
    auto* cs = find_condition(inputs.conditions, Condition::no_context());
    return cs ? overall_mean(*cs) : std::nullopt;
  }();
  auto ceiling = [&]() -> std::optional<double> {
    auto* cs = find_condition(inputs.conditions, Condition::full_context());
    return cs ? overall_mean(*cs) : std::nullopt;
  }();
  auto value = consolidated ? overall_mean(*consolidated) : std::nullopt;
  if (floor && ceiling && value) {
    try {
      result.gap_recovered = gap_recovery(*floor, *ceiling, *value);
    } catch (const Error& e) {
      result.gap_note = e.what();
    }
  } else {
    result.gap_note = "floor, ceiling or consolidated accuracy absent";
  }
  return result;
}

}  // namespace consol::analysis
