#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "lmswitch/cli.hpp"

using namespace lmswitch;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(LMSWITCH_SOURCE_DIR) / "configs";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("lmswitch_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  cli::Options opts(const fs::path& config) const {
    cli::Options o;
    o.config = config.string();
    o.out = dir.string();
    return o;
  }
  // Writes a modified copy of a shipped config into the temp directory.
  fs::path variant(const std::string& base, const std::function<void(json&)>& edit) const {
    json j = read_json_file(kConfigs / (base + ".config.json"));
    edit(j);
    const auto p = dir / ("variant_" + base + ".config.json");
    write_json_file(p, j);
    return p;
  }
  std::size_t files_in(const fs::path& d) const {
    std::size_t k = 0;
    for (const auto& e : fs::recursive_directory_iterator(d))
      if (e.is_regular_file() && e.path().filename().string().rfind("variant_", 0) != 0) ++k;
    return k;
  }

  fs::path dir;
  std::ostringstream out, err;
  cli::Streams io{out, err};
};

}  // namespace

TEST(Config, ShippedFilesMatchBuiltins) {
  EXPECT_EQ(load_config(kConfigs / "ex1.config.json"), example1());
  EXPECT_EQ(load_config(kConfigs / "ex1_printed.config.json"), example1(true));
  EXPECT_EQ(load_config(kConfigs / "ex1_affine.config.json"), example1_affine());
  EXPECT_EQ(load_config(kConfigs / "ex2.config.json"), example2());
}

TEST(Config, RoundTrip) {
  for (const auto& c : {example1(), example1(true), example1_affine(), example2()}) {
    std::ostringstream s;
    detail::pretty(s, to_json(c), 0);
    EXPECT_EQ(config_from_json(json::parse(s.str())), c) << c.name;
  }
}

TEST(Config, ValidationErrors) {
  auto bad = [](const std::function<void(json&)>& edit) {
    json j = to_json(example1());
    edit(j);
    return j;
  };
  EXPECT_THROW(config_from_json(bad([](json& j) { j["metzler"] = {{-1, -1}, {1, -1}}; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["metzler"] = {{-1, 2}, {1, -1}}; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["schema_version"] = 99; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["alpha"] = 0.5; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["modes"][0]["A"] = {{1, 2, 3}}; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["simulation"]["initial_mode"] = 3; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j.erase("C"); })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["modes"][0]["A"] = "x"; })), ConfigError);
}

TEST_F(CliTest, ExampleOneChain) {
  const auto o = opts(kConfigs / "ex1.config.json");
  ASSERT_EQ(cli::cmd_design(o, io), cli::kOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "ex1.design.cert.json"));
  ASSERT_EQ(cli::cmd_certify(o, io), cli::kOk) << err.str();
  const json cert = read_json_file(dir / "ex1.stability.cert.json");
  EXPECT_LT(cert["worst_eig"].get<double>(), -cert["eps"].get<double>());
  auto so = o;
  so.plot = true;
  ASSERT_EQ(cli::cmd_simulate(so, io), cli::kOk) << err.str();
  for (const char* f : {"trace.csv", "events.csv", "trace.svg"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream t(dir / "trace.csv");
  std::string header;
  std::getline(t, header);
  EXPECT_EQ(header, "time,x1,x2,phi1,phi2,e1,e2,sigma,Vphi,J,Jhat");
}

TEST_F(CliTest, DesignFromReloadedCertificateMatches) {
  const auto o = opts(kConfigs / "ex1.config.json");
  ASSERT_EQ(cli::cmd_design(o, io), cli::kOk);
  const auto cfg = load_config(o.config);
  const auto b = cli::load_design(o, cfg);
  const auto fresh = cli::run_design(cfg, io);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT(max_abs_diff(b.dwell.x[i], fresh.dwell.x[i]), 1e-9 * frobenius_norm(fresh.dwell.x[i]));
    EXPECT_LT(max_abs_diff(b.observer.gains[i], fresh.observer.gains[i]), 1e-12);
  }
}

TEST_F(CliTest, AffineVariantReportsUltimateBound) {
  const auto o = opts(kConfigs / "ex1_affine.config.json");
  ASSERT_EQ(cli::cmd_design(o, io), cli::kOk) << err.str();
  ASSERT_EQ(cli::cmd_certify(o, io), cli::kOk) << err.str();
  ASSERT_EQ(cli::cmd_simulate(o, io), cli::kOk) << err.str();
  EXPECT_NE(out.str().find("ultimate bound"), std::string::npos);
}

TEST_F(CliTest, PrintedGainsAreInfeasible) {
  EXPECT_EQ(cli::cmd_design(opts(kConfigs / "ex1_printed.config.json"), io), cli::kInfeasible);
  EXPECT_NE(err.str().find("given observer gains"), std::string::npos);
}

TEST_F(CliTest, NegativeOffDiagonalIsInputError) {
  const auto p = variant("ex1", [](json& j) { j["metzler"] = {{1, -1}, {1, -1}}; });
  EXPECT_EQ(cli::cmd_design(opts(p), io), cli::kInputError);
  EXPECT_NE(err.str().find("negative off-diagonal"), std::string::npos);
  EXPECT_EQ(files_in(dir), 0u);
}

TEST_F(CliTest, LargeZetaIsInfeasible) {
  const auto p = variant("ex1", [](json& j) { j["zeta"] = 30.0; });
  EXPECT_EQ(cli::cmd_design(opts(p), io), cli::kInfeasible);
  EXPECT_EQ(files_in(dir), 0u);
}

TEST_F(CliTest, InflatedHoldIsInfeasibleWithHint) {
  const auto p = variant("ex1", [](json& j) { j["h"] = 10.0; });
  const auto o = opts(p);
  ASSERT_EQ(cli::cmd_design(o, io), cli::kOk) << err.str();
  EXPECT_EQ(cli::cmd_certify(o, io), cli::kInfeasible);
  EXPECT_NE(err.str().find("reduce h"), std::string::npos);
}

TEST_F(CliTest, MissingDesignIsInputError) {
  EXPECT_EQ(cli::cmd_certify(opts(kConfigs / "ex1.config.json"), io), cli::kInputError);
  EXPECT_NE(err.str().find("design certificate not found"), std::string::npos);
  EXPECT_EQ(files_in(dir), 0u);
}

TEST_F(CliTest, MissingConfigIsInputError) {
  EXPECT_EQ(cli::cmd_design(opts(dir / "nope.config.json"), io), cli::kInputError);
  EXPECT_EQ(files_in(dir), 0u);
}

TEST_F(CliTest, UnknownExample) {
  auto o = opts({});
  EXPECT_EQ(cli::cmd_reproduce(3, o, io), cli::kInputError);
  EXPECT_EQ(files_in(dir), 0u);
}

TEST_F(CliTest, ReproduceOneIsBitStable) {
  auto o = opts({});
  ASSERT_EQ(cli::cmd_reproduce(1, o, io), cli::kOk) << err.str();
  for (const char* f : {"ex1.config.json", "ex1.design.cert.json", "ex1.stability.cert.json", "trace.csv", "events.csv",
                        "trace.svg", "summary.txt"})
    EXPECT_TRUE(fs::exists(dir / "ex1" / f)) << f;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string first = slurp(dir / "ex1" / "trace.csv");
  ASSERT_EQ(cli::cmd_reproduce(1, o, io), cli::kOk);
  EXPECT_EQ(slurp(dir / "ex1" / "trace.csv"), first);
}

TEST_F(CliTest, ExecutableExitCodes) {
  const std::string exe = LMSWITCH_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(run("--bogus"), 1);
  EXPECT_EQ(run("reproduce 3 --out " + dir.string()), 1);
  EXPECT_EQ(run("design --config " + (kConfigs / "ex1_printed.config.json").string() + " --out " + dir.string()), 2);
  EXPECT_EQ(run("design --config " + (kConfigs / "ex1.config.json").string() + " --out " + dir.string()), 0);
  EXPECT_EQ(run("certify --config " + (kConfigs / "ex1.config.json").string() + " --out " + dir.string() +
                " --grid-stencil 0.02 --finer 5"),
            0);
}
