#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rpchain/cli.hpp"

using namespace rpchain;
using namespace rpchain::cli;

namespace {

RunConfig parse(const std::string& text)
{
  std::istringstream in(text);
  return parse_config(in, "test");
}

std::string error_of(const std::string& text)
{
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kEllOne = "model.ell = 1\nmodel.g = 0.5\ninteraction.kind = nearest\ninteraction.U = 1.0\n"
                      "phonon.n_max = 2\nphonon.grid_nodes = 5\nrun.beta = 0.5, 1\nrun.samples = 10\nrun.fields = 3\n";

struct TempDir {
  std::filesystem::path path;
  TempDir()
  {
    path = std::filesystem::temp_directory_path() / ("rpchain_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const
  {
    const auto p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

int run_tool(const std::string& args)
{
  const std::string cmd = std::string(RPCHAIN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, ParsesKnownKeys)
{
  const RunConfig c = parse("# comment\nmodel.ell=3\nmodel.t = 1.5\ninteraction.kind = power_law\n"
                            "interaction.alpha = 1.5 # trailing\nphonon.n_max = 2\nrun.seed = 7\nrun.beta = 0.2, 1\n"
                            "run.taus = 1e-2, 5e-3\n");
  EXPECT_EQ(c.model.ell, 3);
  EXPECT_EQ(c.model.t, 1.5);
  EXPECT_EQ(c.model.interaction.kind, InteractionKind::power_law);
  EXPECT_EQ(c.model.interaction.alpha, 1.5);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.betas, (std::vector<double>{0.2, 1.0}));
  EXPECT_EQ(c.taus.size(), 2u);
  const RunConfig t = parse("interaction.kind = table\ninteraction.table = 1:0.5, -1:0.5\n");
  EXPECT_EQ(u_of(t.model.interaction, 1), 0.5);
}

TEST(Config, RejectsBadInput)
{
  EXPECT_NE(error_of("model.ell = 3\nmodel.colour = red\n").find("test:2: unknown key 'model.colour'"), std::string::npos);
  EXPECT_NE(error_of("model.ell = 3\nmodel.ell = 5\n").find("repeated"), std::string::npos);
  EXPECT_NE(error_of("model.ell = three\n").find("test:1"), std::string::npos);
  EXPECT_NE(error_of("model.ell\n").find("expected key = value"), std::string::npos);
  EXPECT_NE(error_of("model.t =\n").find("no value"), std::string::npos);
  EXPECT_NE(error_of("interaction.kind = nearest\ninteraction.alpha = 1.5\n").find("requires interaction.kind=power_law"),
            std::string::npos);
  EXPECT_NE(error_of("interaction.kind = nearest\n").find("needs interaction.U"), std::string::npos);
  EXPECT_NE(error_of("interaction.kind = cubic\n").find("interaction.kind"), std::string::npos);
  EXPECT_NE(error_of("interaction.kind = table\ninteraction.table = 1:0.5\n").find("interaction.table"),
            std::string::npos);
  EXPECT_FALSE(error_of("model.t = 0\n").empty());
  EXPECT_FALSE(error_of("run.beta = -1\n").empty());
  EXPECT_FALSE(error_of("run.taus = 0.01\n").empty());
  EXPECT_FALSE(error_of("run.method = magic\n").empty());
  EXPECT_FALSE(error_of("run.seed = -3\n").empty());
}

TEST(Commands, FreeFermionSpectrum)
{
  const RunConfig c = parse("model.ell = 3\nmodel.t = 1.25\nmodel.g = 0\nphonon.n_max = 0\n");
  const json r = run("spectrum", "", c, {});
  EXPECT_TRUE(r["pass"].get<bool>());
  EXPECT_NEAR(r["result"]["E0"].get<double>(), -5.0, 1e-10);
  EXPECT_EQ(r["result"]["dim"].get<long>(), 20);
}

TEST(Commands, EvenLengthRejectedForReflectionCommands)
{
  const RunConfig c = parse("model.ell = 2\nphonon.n_max = 0\n");
  EXPECT_THROW(run("positivity", "reflection", c, {}), ConfigError);
  EXPECT_THROW(run("paths", "", c, {}), ConfigError);
  EXPECT_THROW(run("positivity", "", c, {}), ConfigError);
  EXPECT_THROW(run("no-such-command", "", c, {}), ConfigError);
}

TEST(Commands, AllIsDeterministic)
{
  const RunConfig c = parse(kEllOne);
  const json a = run("all", "", c, {});
  RunOptions two;
  two.threads = 2;
  const json b = run("all", "", c, two);
  EXPECT_TRUE(a["pass"].get<bool>()) << a["result"].dump(2);
  EXPECT_TRUE(a.contains("timestamp"));
  EXPECT_EQ(deterministic_dump(a), deterministic_dump(b));
  EXPECT_EQ(deterministic_dump(a).find("timestamp"), std::string::npos);
}

TEST(Commands, SeedChangesSampledContent)
{
  RunConfig c = parse(kEllOne);
  const json a = run("inequalities", "energy", c, {});
  c.seed = 43;
  const json b = run("inequalities", "energy", c, {});
  EXPECT_NE(deterministic_dump(a), deterministic_dump(b));
}

TEST(Tool, ExitCodes)
{
  TempDir dir;
  const std::string good = dir.write("good.cfg", kEllOne);
  const std::string bad = dir.write("bad.cfg", "model.ell = 1\nmodel.bogus = 1\n");
  const std::string failing = dir.write("fail.cfg", "interaction.kind = table\ninteraction.table = 1:-1, -1:-1\n");
  const std::string out = (dir.path / "report.json").string();
  EXPECT_EQ(run_tool("--config " + good + " spectrum --out " + out), 0);
  std::ifstream f(out);
  const json report = json::parse(f);
  EXPECT_EQ(report["command"], "spectrum");
  EXPECT_TRUE(report["pass"].get<bool>());
  EXPECT_EQ(run_tool("--config " + good + " --seed 5 --threads 2 irbound -v"), 0);
  EXPECT_EQ(run_tool("--config " + bad + " spectrum"), 2);
  EXPECT_EQ(run_tool("spectrum"), 2);
  EXPECT_EQ(run_tool("--config " + good + " positivity"), 2);
  EXPECT_EQ(run_tool("--config " + good + " no-such-command"), 2);
  EXPECT_EQ(run_tool("--config " + failing + " irbound"), 1);
}

TEST(Tool, CsvSideFiles)
{
  TempDir dir;
  const std::string cfg = dir.write("l1.cfg", kEllOne);
  const std::string csv = (dir.path / "csv").string();
  EXPECT_EQ(run_tool("--config " + cfg + " --csv-dir " + csv + " correlations"), 0);
  std::ifstream f(std::filesystem::path(csv) / "correlations.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "i,j,corr,staggered");
}
