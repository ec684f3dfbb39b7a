#include "oreos/config.hpp"
#include "oreos/evaluation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace oreos;

namespace {

EvalCase make_case(std::uint64_t q, double shift_deg, int rank, bool correct, bool success, double yaw_deg) {
  EvalCase c;
  c.query_id = q;
  c.shift = deg2rad(shift_deg);
  c.true_rank = rank;
  c.correct = correct;
  c.success = success;
  c.pre_icp_yaw_error = deg2rad(yaw_deg);
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("canonical text round trips") {
    RunConfig c;
    c.seed = 99;
    c.train.epochs = 3;
    c.eval.yaw_step = deg2rad(15.0);
    c.icp.max_correspondence_distance = 0.35;
    const std::string text = c.to_keyvalue().to_string();
    const RunConfig back = RunConfig::from_keyvalue(KeyValueFile::parse(text));
    CHECK(back.to_keyvalue().to_string() == text);
    CHECK(back.seed == 99);
    CHECK(back.train.epochs == 3);
    CHECK(back.eval.yaw_step == doctest::Approx(deg2rad(15.0)));
    CHECK(back.hash() == c.hash());
  }

  TEST_CASE("overrides, unknown keys and validation") {
    KeyValueFile kv;
    kv.set_assignment("train.batch_size=4");
    kv.set_assignment("eval.yaw_step_deg = 30");
    const RunConfig c = RunConfig::from_keyvalue(kv);
    CHECK(c.train.batch_size == 4);
    CHECK(c.eval.yaw_step == doctest::Approx(deg2rad(30.0)));

    KeyValueFile unknown;
    unknown.set("train.epoch", "3");
    CHECK_THROWS_WITH(RunConfig::from_keyvalue(unknown), doctest::Contains("train.epoch"));
    KeyValueFile bad;
    bad.set("train.epochs", "many");
    CHECK_THROWS(RunConfig::from_keyvalue(bad));

    RunConfig neg;
    neg.sampling.similar_radius = -1;
    CHECK_THROWS(neg.validate());
  }

  TEST_CASE("hash tracks every setting") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.seed = 8;
    CHECK(a.hash() != b.hash());
    b = a;
    b.icp.normal_neighbors = 11;
    CHECK(a.hash() != b.hash());
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("paths resolve against the output directory") {
    RunConfig c;
    c.out_dir = "/tmp/somewhere";
    CHECK(c.resolve(c.map_file) == std::filesystem::path("/tmp/somewhere/map.bin"));
    CHECK(c.resolve("/abs/x") == std::filesystem::path("/abs/x"));
  }
}

TEST_SUITE("evaluation") {
  TEST_CASE("success needs both thresholds, inclusive") {
    const double eps = 1e-9;
    const double yaw = deg2rad(2.5);
    CHECK(localization_success(1.5, yaw));
    CHECK(localization_success(1.5 - eps, -yaw + eps));
    CHECK_FALSE(localization_success(1.5 + eps, 0.0));
    CHECK_FALSE(localization_success(0.0, yaw + eps));
    CHECK_FALSE(localization_success(0.0, -yaw - eps));
    CHECK(localization_success(0.0, 0.0));
  }

  TEST_CASE("summaries of hand-built cases") {
    std::vector<EvalCase> cases = {
        make_case(1, 0, 1, true, true, 4.0),    make_case(2, 0, 2, false, false, 30.0),
        make_case(3, 0, 0, false, false, 90.0), make_case(4, 0, 1, true, false, -6.0),
        make_case(1, 10, 1, true, true, -2.0),  make_case(2, 10, 1, true, true, 2.0),
        make_case(3, 10, 3, false, false, 1.0), make_case(4, 10, 0, false, false, 0.0),
    };
    const EvalReport r = summarize(cases, {0.0, deg2rad(10.0)}, 3, 20, 4);
    REQUIRE(r.shift_curve.size() == 2);
    CHECK(r.shift_curve[0].shift_deg == doctest::Approx(0.0));
    CHECK(r.shift_curve[0].recall == doctest::Approx(0.25));
    CHECK(r.shift_curve[1].recall == doctest::Approx(0.5));
    CHECK(r.shift_curve[0].recall_at_1 == doctest::Approx(0.5));

    REQUIRE(r.recall_at_k.size() == 3);
    // k=1: 0.5 and 0.5; k=2: 0.75 and 0.5; k=3: 0.75 and 0.75.
    CHECK(r.recall_at_k[0].recall == doctest::Approx(0.5));
    CHECK(r.recall_at_k[0].stddev == doctest::Approx(0.0));
    CHECK(r.recall_at_k[1].recall == doctest::Approx(0.625));
    CHECK(r.recall_at_k[1].stddev == doctest::Approx(0.125));
    CHECK(r.recall_at_k[2].recall == doctest::Approx(0.75));
    CHECK(r.recall_at_1() == doctest::Approx(0.5));

    // Yaw statistics over the four correct cases: |4|, |-6|, |-2|, |2|.
    CHECK(r.yaw.samples == 4);
    CHECK(r.yaw.mean_deg == doctest::Approx(3.5));
    CHECK(r.yaw.std_deg == doctest::Approx(std::sqrt((0.25 + 6.25 + 2.25 + 2.25) / 4.0)));
    CHECK(r.yaw.recall_pct == 100.0);
    CHECK(r.post_icp_success_given_correct == doctest::Approx(0.75));
  }

  TEST_CASE("reports are written as plain csv") {
    std::vector<EvalCase> cases = {make_case(1, 0, 1, true, true, 1.0)};
    EvalReport r = summarize(cases, {0.0}, 2, 5, 1);
    r.runtimes = {{"projection", 0.5}};
    const auto dir = testing::temp_dir("report");
    write_report(dir, r);
    CHECK(slurp(dir / "recall_vs_shift.csv").starts_with("shift_deg,recall\n0,1\n"));
    CHECK(slurp(dir / "recall_at_k.csv").starts_with("k,recall,stddev\n1,1,0\n2,1,0\n"));
    CHECK(slurp(dir / "yaw_stats.csv") == "mean_deg,std_deg,recall_pct\n1,0,100\n");
    CHECK(slurp(dir / "runtimes.csv") == "stage,mean_ms\nprojection,0.5\n");
    CHECK(std::filesystem::exists(dir / "cases.csv"));
  }
}
