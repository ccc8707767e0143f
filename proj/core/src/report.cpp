#include <fmt/format.h>

#include "consol/analysis.hpp"
#include "consol/jsonl.hpp"

namespace consol::analysis {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kAbsent = "absent";

std::string mean_text(const RetentionCell& cell) {
  return cell.value ? format1(cell.value->mean) : std::string(kAbsent);
}

std::string se_text(const RetentionCell& cell) {
  return cell.value && cell.value->se ? format1(*cell.value->se) : std::string(kAbsent);
}

std::string opt_text(const std::optional<double>& v, int decimals = 1) {
  if (!v) return std::string(kAbsent);
  return decimals == 1 ? format1(*v) : fmt::format("{:.{}f}", *v, decimals);
}

json cell_json(const RetentionCell& cell) {
  json j{{"n", cell.n}};
  if (cell.value) {
    j["mean"] = cell.value->mean;
    j["se"] = cell.value->se ? json(*cell.value->se) : json(nullptr);
  } else {
    j["mean"] = nullptr;
    j["se"] = nullptr;
  }
  return j;
}

json row_json(const RetentionRow& row) {
  json cells = json::object();
  for (std::size_t c = 0; c < 4; ++c) cells[std::string(to_string(kColumns[c]))] = cell_json(row.cells[c]);
  return json{{"condition", row.condition}, {"present", row.present}, {"cells", cells}};
}

std::string retention_csv(const std::vector<RetentionRow>& rows, bool with_se) {
  std::string out = "condition";
  for (Column c : kColumns) {
    out += fmt::format(",{}_mean", to_string(c));
    if (with_se) out += fmt::format(",{}_se", to_string(c));
    out += fmt::format(",{}_n", to_string(c));
  }
  out += '\n';
  for (const auto& row : rows) {
    out += row.condition;
    for (std::size_t c = 0; c < 4; ++c) {
      out += "," + mean_text(row.cells[c]);
      if (with_se) out += "," + se_text(row.cells[c]);
      out += fmt::format(",{}", row.cells[c].n);
    }
    out += '\n';
  }
  return out;
}

std::string retention_markdown(const std::vector<RetentionRow>& rows) {
  std::string out =
      "| Condition | Semantic | Procedural | Episodic | Overall |\n"
      "|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    out += fmt::format("| {} |", row.condition);
    for (const auto& cell : row.cells) {
      if (!cell.value) {
        out += " absent |";
      } else if (cell.value->se) {
        out += fmt::format(" {} ± {} |", format1(cell.value->mean), format1(*cell.value->se));
      } else {
        out += fmt::format(" {} |", format1(cell.value->mean));
      }
    }
    out += '\n';
  }
  return out;
}

std::string per_conversation_csv(const std::vector<ConditionScores>& conditions) {
  std::string out = "conversation_id,condition,category,pass,fail,error,accuracy,error_rate\n";
  for (const auto& cs : conditions) {
    if (!cs.present) continue;
    for (const auto& s : cs.per_conversation) {
      for (Column c : kColumns) {
        const auto& cell = cell_for(s, c);
        out += fmt::format("{},{},{},{},{},{},{},{}\n", s.conversation_id, cs.condition.name(),
                           to_string(c), cell.pass, cell.fail, cell.error,
                           opt_text(cell.accuracy()), format1(cell.error_rate()));
      }
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepEpoch>& sweep) {
  // Normalized columns only when the series is complete and non-constant.
  auto normalized = [&](auto get) -> std::vector<std::optional<double>> {
    std::vector<double> values;
    for (const auto& e : sweep) {
      auto v = get(e);
      if (!v) return std::vector<std::optional<double>>(sweep.size());
      values.push_back(*v);
    }
    std::vector<std::optional<double>> out(sweep.size());
    if (values.size() < 2) return out;
    try {
      auto n = normalize_curve(values);
      for (std::size_t i = 0; i < n.size(); ++i) out[i] = n[i];
    } catch (const std::exception&) {
    }
    return out;
  };
  auto fail = normalized([](const SweepEpoch& e) { return e.fail_rate; });
  auto mean = normalized([](const SweepEpoch& e) -> std::optional<double> {
    return e.ce ? std::optional(e.ce->mean_ce) : std::nullopt;
  });
  auto median = normalized([](const SweepEpoch& e) -> std::optional<double> {
    return e.ce ? std::optional(e.ce->median_ce) : std::nullopt;
  });
  auto ce_text = [](const std::optional<CEStats>& ce, double CEStats::*field) {
    return ce ? fmt::format("{:.4f}", (*ce).*field) : std::string(kAbsent);
  };
  std::string out =
      "epoch,fail_rate,mean_ce,median_ce,p90_ce,token_count,fail_rate_norm,mean_ce_norm,"
      "median_ce_norm\n";
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& e = sweep[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", e.epoch, opt_text(e.fail_rate),
                       ce_text(e.ce, &CEStats::mean_ce), ce_text(e.ce, &CEStats::median_ce),
                       ce_text(e.ce, &CEStats::p90_ce),
                       e.ce ? std::to_string(e.ce->token_count) : std::string(kAbsent),
                       opt_text(fail[i], 4), opt_text(mean[i], 4), opt_text(median[i], 4));
  }
  return out;
}

std::string degradation_csv(const AnalysisResult& r) {
  std::string out = "cycle,condition";
  for (Column c : kColumns) out += fmt::format(",{}_mean,{}_se", to_string(c), to_string(c));
  out += '\n';
  auto emit = [&](int cycle, const RetentionRow& row) {
    out += fmt::format("{},{}", cycle, row.condition);
    for (const auto& cell : row.cells) out += "," + mean_text(cell) + "," + se_text(cell);
    out += '\n';
  };
  for (const auto& row : r.unweighted) {
    if (row.condition == "full_context") emit(0, row);
  }
  for (const auto& row : r.unweighted) {
    if (row.condition.starts_with("compaction-")) emit(std::stoi(row.condition.substr(11)), row);
  }
  return out;
}

std::string summary_markdown(const AnalysisResult& r) {
  std::string out = "# Consolidation vs compaction\n\n## Retention (mean ± SE across conversations)\n\n";
  out += retention_markdown(r.unweighted);
  out += "\n## Statistics\n\n";
  if (r.compaction_vs_consolidated) {
    const auto& t = *r.compaction_vs_consolidated;
    out += fmt::format("- Paired t-test, compaction cycle {} vs consolidated epoch {}: t({}) = {:.2f}, p = {:.3g}\n",
                       r.final_cycle.value_or(0), r.main_epoch.value_or(0), t.df, t.t,
                       t.p_two_sided);
  } else {
    out += fmt::format("- Paired t-test: not computed ({})\n", r.t_test_note);
  }
  if (r.gap_recovered) {
    out += fmt::format("- Floor-to-ceiling gap recovered by consolidation: {:.3f} ({:.0f}%)\n",
                       *r.gap_recovered, *r.gap_recovered * 100.0);
  } else {
    out += fmt::format("- Gap recovery: not computed ({})\n", r.gap_note);
  }
  if (r.selected_epoch) {
    out += fmt::format("- Selected epoch (lowest fail rate, earliest on ties): {}\n", *r.selected_epoch);
  } else {
    out += "- Selected epoch: absent (no consolidated evaluation)\n";
  }
  auto corr = [&](const char* what, const Correlation& c) {
    if (c.r) {
      out += fmt::format("- Pearson r ({} per-token CE vs fail rate): {:+.3f}\n", what, *c.r);
    } else {
      out += fmt::format("- Pearson r ({} per-token CE vs fail rate): not computed ({})\n", what, c.note);
    }
  };
  corr("median", r.median_ce_vs_fail);
  corr("mean", r.mean_ce_vs_fail);
  return out;
}

}  // namespace

json to_json(const AnalysisResult& r) {
  json unweighted = json::array(), pooled = json::array(), sweep = json::array();
  for (const auto& row : r.unweighted) unweighted.push_back(row_json(row));
  for (const auto& row : r.pooled) pooled.push_back(row_json(row));
  for (const auto& e : r.sweep) {
    json j{{"epoch", e.epoch}, {"fail_rate", e.fail_rate ? json(*e.fail_rate) : json(nullptr)}};
    if (e.ce) {
      j["ce"] = {{"mean", e.ce->mean_ce}, {"median", e.ce->median_ce}, {"p90", e.ce->p90_ce},
                 {"token_count", e.ce->token_count}};
    }
    sweep.push_back(j);
  }
  json out{{"retention_unweighted", unweighted},
           {"retention_pooled", pooled},
           {"epoch_sweep", sweep},
           {"selected_epoch", r.selected_epoch ? json(*r.selected_epoch) : json(nullptr)},
           {"main_epoch", r.main_epoch ? json(*r.main_epoch) : json(nullptr)},
           {"final_cycle", r.final_cycle ? json(*r.final_cycle) : json(nullptr)}};
  if (r.compaction_vs_consolidated) {
    const auto& t = *r.compaction_vs_consolidated;
    out["paired_t"] = {{"t", t.t}, {"df", t.df}, {"p_two_sided", t.p_two_sided}};
  } else {
    out["paired_t"] = {{"note", r.t_test_note}};
  }
  auto corr = [](const Correlation& c) {
    return c.r ? json{{"r", *c.r}} : json{{"note", c.note}};
  };
  out["pearson_median_ce_vs_fail"] = corr(r.median_ce_vs_fail);
  out["pearson_mean_ce_vs_fail"] = corr(r.mean_ce_vs_fail);
  out["gap_recovery"] = r.gap_recovered ? json{{"fraction", *r.gap_recovered}}
                                        : json{{"note", r.gap_note}};
  return out;
}

void emit_report(const AnalysisResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file(dir / "retention_table.csv", retention_csv(result.unweighted, true));
  write_text_file(dir / "retention_table.md", retention_markdown(result.unweighted));
  write_text_file(dir / "retention_pooled.csv", retention_csv(result.pooled, false));
  write_text_file(dir / "per_conversation.csv", per_conversation_csv(result.conditions));
  write_text_file(dir / "epoch_sweep.csv", sweep_csv(result.sweep));
  write_text_file(dir / "degradation.csv", degradation_csv(result));
  write_text_file(dir / "summary.md", summary_markdown(result));
}

}  // namespace consol::analysis
