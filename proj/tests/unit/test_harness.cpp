#include "bax/errors.hpp"
#include "bax/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace bax;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string parse_error_where(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.where();
  }
  return "<no error>";
}

const char* kTopK = R"({
  "problem": {"type": "topk", "num_points": 12, "k": 2, "dimension": 1},
  "methods": ["EIGv", "Random"],
  "loop": {"budget": 3, "num_posterior_samples": 8, "min_ball_size": 4},
  "trials": 2
})";

}  // namespace

TEST(Config, MinimalTopKFillsDefaults) {
  const auto c = parse(R"({"problem": {"type": "topk"}, "methods": ["EIGv"], "loop": {"budget": 5}})");
  EXPECT_EQ(c.problem.objective, "skewed_sin");
  EXPECT_EQ(c.problem.num_points, 150u);
  EXPECT_EQ(c.problem.k, 10u);
  EXPECT_EQ(c.loop.num_posterior_samples, 100u);
  EXPECT_DOUBLE_EQ(c.model.noise_variance, 1e-2);
  EXPECT_DOUBLE_EQ(c.model.kernel.signal_variance, 1.0);
  ASSERT_EQ(c.model.kernel.lengthscale.size(), 2);
  EXPECT_DOUBLE_EQ(c.model.kernel.lengthscale[0], 2.0);  // 10% of 20
  EXPECT_EQ(c.trials, 5u);
  EXPECT_EQ(c.candidates, CandidateMode::Support);
  EXPECT_EQ(c.loop.abc.min_ball_size, 30u);
}

TEST(Config, GraphAndLocalOptDefaults) {
  const auto g = parse(R"({"problem": {"type": "graph"}, "methods": ["EIGv"], "loop": {"budget": 5}})");
  EXPECT_EQ(g.loop.num_posterior_samples, 20u);
  EXPECT_EQ(g.problem.source, 90);
  EXPECT_EQ(g.problem.dest, 99);
  EXPECT_DOUBLE_EQ(g.problem.domain.upper[1], 4.0);
  EXPECT_DOUBLE_EQ(g.model.kernel.lengthscale[1], 0.5);

  const auto l = parse(R"({"problem": {"type": "local_opt"}, "methods": ["EIGv"], "loop": {"budget": 5}})");
  EXPECT_EQ(l.problem.objective, "branin");
  EXPECT_EQ(l.loop.num_posterior_samples, 100u);
  EXPECT_EQ(l.candidates, CandidateMode::Uniform);
  EXPECT_EQ(l.num_candidates, 1000u);
  EXPECT_EQ(l.problem.es.total_queries(), 211u);
  EXPECT_DOUBLE_EQ(l.problem.es.proposal_std, 0.75);  // 5% of the 15-wide sides
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk", "kk": 3}, "methods": ["EIGv"], "loop": {"budget": 5}})"),
            "problem.kk");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk"}, "methods": ["EIGv"], "loop": {}})"),
            "loop.budget");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk"}, "methods": ["EIGv"], "loop": {"budget": "5"}})"),
            "loop.budget");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk"}, "loop": {"budget": 5}})"), "methods");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk"}, "methods": ["EIGv"], "loop": {"budget": 5}, "extra": 1})"),
            "extra");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "maze"}, "methods": ["EIGv"], "loop": {"budget": 5}})"),
            "problem.type");
  EXPECT_EQ(parse_error_where(R"({"problem": {"type": "topk"}, "methods": ["EIGv"], "model": {"lengthscale": [1, "a"]}, "loop": {"budget": 5}})"),
            "model.lengthscale[1]");
  EXPECT_EQ(parse_error_where("{not json"), "<document>");
  try {
    parse(R"({"problem": {"type": "topk"}, "methods": ["EIGv", "UCB"], "loop": {"budget": 5}})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "methods[1]");
    EXPECT_NE(std::string(e.what()).find("EIGout"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("FullAlgorithm"), std::string::npos);
  }
}

TEST(Config, RoundTrip) {
  for (const char* text :
       {kTopK, R"({"problem": {"type": "graph", "nx": 5, "ny": 4}, "methods": ["EIGe", "FullAlgorithm"], "loop": {"budget": 5}, "base_seed": 9})",
        R"({"problem": {"type": "local_opt", "population": 7}, "methods": ["EIGf"], "model": {"kernel": "matern52", "lengthscale": 1.5}, "loop": {"budget": 5}})"}) {
    const auto c = parse(text);
    const std::string s = serialize_config(c);
    const auto back = parse(s);
    EXPECT_EQ(serialize_config(back), s);
    EXPECT_EQ(back.methods, c.methods);
    EXPECT_TRUE(back.model.kernel.lengthscale.isApprox(c.model.kernel.lengthscale));
    EXPECT_EQ(back.problem.domain.lower, c.problem.domain.lower);
  }
}

TEST(Experiment, RowCountsAndDeterminism) {
  auto c = parse(R"({"problem": {"type": "topk", "num_points": 12, "k": 2, "dimension": 1},
                     "methods": ["Random"], "loop": {"budget": 2, "num_posterior_samples": 5}, "trials": 1})");
  const auto t = execute_experiment(c);
  ASSERT_TRUE(t.all_valid());
  // Two metric names, two iterations each.
  EXPECT_EQ(t.rows.size(), 4u);
  for (const auto& r : t.rows) {
    EXPECT_TRUE(r.metric == "jaccard_medoid" || r.metric == "jaccard_mean");
    EXPECT_GE(r.value, 0.0);
    EXPECT_LE(r.value, 1.0);
  }
  const auto c2 = parse(kTopK);
  const auto a = execute_experiment(c2);
  const auto b = execute_experiment(c2);
  std::ostringstream sa, sb;
  write_results_csv(a.rows, sa);
  write_results_csv(b.rows, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.rows.size(), 2u * 2u * 3u * 2u);
  // Seeds follow base_seed + trial.
  EXPECT_EQ(a.runs[1].seed, 1u);
}

TEST(Experiment, FullAlgorithmUsesItsQueryCount) {
  const auto c = parse(R"({"problem": {"type": "graph", "nx": 4, "ny": 4}, "methods": ["FullAlgorithm"],
                           "loop": {"budget": 2}, "trials": 1})");
  const auto t = execute_experiment(c);
  ASSERT_EQ(t.runs.size(), 1u);
  ASSERT_FALSE(t.rows.empty());
  EXPECT_EQ(t.rows[0].iteration, static_cast<int>(t.runs[0].queries));
  EXPECT_EQ(t.rows[0].value, 0.0);
}

TEST(Experiment, LocalOptMetrics) {
  const auto c = parse(R"({"problem": {"type": "local_opt", "population": 5, "generations": 4},
                           "methods": ["EIGv", "FullAlgorithm"], "model": {"signal_variance": 2500},
                           "loop": {"budget": 2, "num_posterior_samples": 4, "num_candidates": 50}, "trials": 1})");
  const auto t = execute_experiment(c);
  ASSERT_TRUE(t.all_valid()) << t.runs[0].error;
  const auto names = t.metric_names();
  EXPECT_NE(std::find(names.begin(), names.end(), "regret_posterior_mean"), names.end());
  std::size_t full = 0;
  for (const auto& r : t.rows) {
    EXPECT_GE(r.value, 0.0);
    if (r.method == "FullAlgorithm" && r.metric == "regret_medoid") ++full;
  }
  EXPECT_EQ(full, 21u);
}

TEST(Experiment, FailureRowsKeepPartialTable) {
  auto c = parse(kTopK);
  c.model.noise_variance = 0.0;
  c.methods = {"EIGf", "Random"};
  const auto t = execute_experiment(c);
  EXPECT_FALSE(t.all_valid());
  bool failed_row = false, random_rows = false;
  for (const auto& r : t.rows) {
    if (r.metric == "failed") {
      failed_row = true;
      EXPECT_TRUE(std::isnan(r.value));
    }
    if (r.method == "Random") random_rows = true;
  }
  EXPECT_TRUE(failed_row);
  EXPECT_TRUE(random_rows);
}

TEST(Summary, MeanAndStandardError) {
  ResultsTable t;
  t.rows = {{"A", 0, 1, "m", 1.0}, {"A", 1, 1, "m", 3.0}, {"A", 2, 1, "m", 5.0}, {"B", 0, 1, "m", 2.0}};
  const auto s = t.summarize();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].mean, 3.0);
  EXPECT_DOUBLE_EQ(s[0].stderr_, 2.0 / std::sqrt(3.0));
  EXPECT_EQ(s[1].count, 1u);
  EXPECT_EQ(s[1].stderr_, 0.0);
}

TEST(Results, CsvRoundTripAndFiles) {
  std::ostringstream empty;
  write_results_csv({}, empty);
  EXPECT_EQ(empty.str(), "method,trial,iteration,metric,value\n");

  const auto t = execute_experiment(parse(kTopK));
  std::ostringstream out;
  write_results_csv(t.rows, out);
  std::istringstream in(out.str());
  const auto back = read_results_csv(in);
  ASSERT_EQ(back.size(), t.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].method, t.rows[i].method);
    EXPECT_EQ(back[i].trial, t.rows[i].trial);
    EXPECT_EQ(back[i].iteration, t.rows[i].iteration);
    EXPECT_EQ(back[i].metric, t.rows[i].metric);
    EXPECT_EQ(back[i].value, t.rows[i].value);
  }

  const auto dir = std::filesystem::temp_directory_path() / "bax_results_test";
  std::filesystem::remove_all(dir);
  const auto files = write_results(t, dir.string());
  EXPECT_EQ(files.size(), 3u + t.runs.size());
  std::ifstream csv(dir / "results.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, t.rows.size() + 1);
  std::ifstream cfg(dir / "config.json");
  std::stringstream cfg_text;
  cfg_text << cfg.rdbuf();
  EXPECT_EQ(serialize_config(parse(cfg_text.str())), serialize_config(t.config));
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "EIGv_trial1.json"));
  std::filesystem::remove_all(dir);

  EXPECT_THROW(write_results(t, "/proc/forbidden/dir"), InputError);
}

TEST(Plot, PolylinesMatchMeans) {
  const auto t = execute_experiment(parse(kTopK));
  std::ostringstream svg;
  emit_plot(t, "jaccard_mean", svg);
  const std::string doc = svg.str();
  const std::regex line_re(
      "<polyline class=\"mean\" data-method=\"([^\"]+)\" data-values=\"([^\"]*)\"[^>]*points=\"([^\"]*)\"");
  std::map<std::string, std::pair<std::string, std::string>> lines;
  for (auto it = std::sregex_iterator(doc.begin(), doc.end(), line_re); it != std::sregex_iterator(); ++it) {
    lines[(*it)[1]] = {(*it)[2], (*it)[3]};
  }
  ASSERT_EQ(lines.size(), 2u);
  std::smatch range;
  ASSERT_TRUE(std::regex_search(doc, range, std::regex("data-y-range=\"([^,]+),([^\"]+)\"")));
  const double y0 = std::stod(range[1]), y1 = std::stod(range[2]);
  std::size_t legends = 0;
  for (std::size_t p = doc.find("class=\"legend\""); p != std::string::npos; p = doc.find("class=\"legend\"", p + 1)) ++legends;
  EXPECT_EQ(legends, 2u);
  EXPECT_NE(doc.find("class=\"band\""), std::string::npos);

  for (const auto& s : t.summarize()) {
    if (s.metric != "jaccard_mean") continue;
    std::istringstream values(lines.at(s.method).first), pixels(lines.at(s.method).second);
    bool found = false;
    for (std::string v, p; values >> v && pixels >> p;) {
      const auto vc = v.find(','), pc = p.find(',');
      if (std::stoi(v.substr(0, vc)) != s.iteration) continue;
      EXPECT_NEAR(std::stod(v.substr(vc + 1)), s.mean, 1e-12);
      // Pixel y inverts back to the mean: plot area spans y in [30, 370].
      const double back = y0 + (370.0 - std::stod(p.substr(pc + 1))) / 340.0 * (y1 - y0);
      EXPECT_NEAR(back, s.mean, 1e-6);
      found = true;
    }
    EXPECT_TRUE(found);
  }
  EXPECT_THROW(emit_plot(t, "nonexistent", svg), InputError);
}

TEST(Plot, SingleTrialHasNoBand) {
  auto c = parse(kTopK);
  c.trials = 1;
  c.methods = {"Random"};
  std::ostringstream svg;
  emit_plot(execute_experiment(c), "jaccard_medoid", svg);
  EXPECT_EQ(svg.str().find("class=\"band\""), std::string::npos);
  EXPECT_NE(svg.str().find("class=\"mean\""), std::string::npos);
}
