#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <gtest/gtest.h>

#include "cli.hpp"
#include "msgpca/data.hpp"

namespace msgpca::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  Cli cli;
  std::ostringstream out, err;
  const int code = cli.run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("msgpca-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

TEST(Help, ListsEveryOptionWithItsDefault) {
  Cli cli;
  std::vector<CLI::App*> apps = cli.app().get_subcommands([](CLI::App*) { return true; });
  apps.push_back(&cli.app());
  ASSERT_EQ(apps.size(), 7u);
  for (CLI::App* app : apps) {
    const std::string name = app == &cli.app() ? "" : app->get_name();
    const Outcome help = invoke(name.empty() ? std::vector<std::string>{"--help"}
                                             : std::vector<std::string>{name, "--help"});
    EXPECT_EQ(help.code, kExitOk) << name;
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_group().empty()) continue;  // hidden
      const std::string flag = opt->get_name(false, true);
      EXPECT_NE(help.out.find(opt->get_name()), std::string::npos) << name << " " << flag;
      if (opt->get_name() == "--help") continue;
      if (opt->get_required()) {
        EXPECT_NE(help.out.find("REQUIRED"), std::string::npos) << name << " " << flag;
      } else if (opt->get_expected_max() == 0 && opt->get_default_str().empty()) {
        EXPECT_NE(opt->get_description().find("[default: off]"), std::string::npos)
            << name << " " << flag;
      } else {
        ASSERT_FALSE(opt->get_default_str().empty()) << name << " " << flag;
        EXPECT_NE(help.out.find("[" + opt->get_default_str() + "]"), std::string::npos)
            << name << " " << flag;
      }
    }
  }
}

TEST(Help, DocumentsEverySubcommand) {
  const Outcome help = invoke({"--help"});
  for (const char* sub : {"run", "experiment", "project", "round", "ingest", "selftest"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(help.out.find("mutate"), std::string::npos);
}

TEST(Usage, ErrorsExitWithTwo) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  const Outcome missing_k = invoke({"run", "--algo", "msg", "--dist", "trap", "--T", "10"});
  EXPECT_EQ(missing_k.code, kExitUsage);
  EXPECT_NE(missing_k.err.find("--k"), std::string::npos);
  EXPECT_EQ(invoke({"run", "--k", "1", "--T", "5", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(invoke({"run", "--k", "1", "--T", "5", "--algo", "sgd"}).code, kExitUsage);
  EXPECT_EQ(invoke({"run", "--k", "3", "--T", "5", "--dist", "trap", "-o",
                    (scratch("k") / "t.csv").string()})
                .code,
            kExitUsage);
  EXPECT_EQ(invoke({"experiment", "/nonexistent/figure.spec"}).code, kExitUsage);
  EXPECT_EQ(invoke({"project", "--values", "0.5", "--k", "2"}).code, kExitUsage);
}

TEST(Usage, DataErrorsExitWithThree) {
  const fs::path dir = scratch("data");
  std::ofstream(dir / "junk.idx") << "not an idx file";
  EXPECT_EQ(invoke({"ingest", (dir / "junk.idx").string(), "-o", (dir / "c.bin").string()}).code,
            kExitData);
  EXPECT_EQ(invoke({"run", "--k", "1", "--T", "5", "--dist", "idx", "--data",
                    (dir / "missing.idx").string()})
                .code,
            kExitData);
}

TEST(Run, WritesOneRowPerIteration) {
  const fs::path csv = scratch("run") / "trace.csv";
  const Outcome r = invoke({"run", "--algo", "msg", "--dist", "orthogonal", "--d", "32", "--tau",
                            "1.1", "--k", "4", "--T", "16384", "--seed", "7", "-o", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(count_lines(csv), 16385u);
  EXPECT_NE(r.out.find("final suboptimality"), std::string::npos);
}

TEST(Run, ReportsTrapAlignment) {
  const fs::path csv = scratch("trap") / "trace.csv";
  const Outcome r = invoke({"run", "--algo", "incremental", "--dist", "trap", "--k", "1", "--T",
                            "1000", "--seed", "1", "-o", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const bool e1 = r.out.find("(e1-aligned)") != std::string::npos;
  const bool e2 = r.out.find("(e2-aligned)") != std::string::npos;
  EXPECT_NE(e1, e2);
  EXPECT_NE(r.out.find("final rank: 1"), std::string::npos);
}

TEST(Run, IsDeterministic) {
  const fs::path dir = scratch("det");
  const std::vector<std::string> base = {"run", "--algo", "capped", "--k", "2", "--d", "8", "--T",
                                         "300", "--seed", "3", "--rounding"};
  auto with = [&](const std::string& file) {
    auto a = base;
    a.push_back("-o");
    a.push_back((dir / file).string());
    return invoke(a);
  };
  const Outcome a = with("a.csv");
  const Outcome b = with("b.csv");
  ASSERT_EQ(a.code, kExitOk) << a.err;
  std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(a.out.find("rounded suboptimality"), std::string::npos);
}

TEST(Project, Examples) {
  Outcome r = invoke({"project", "--values", "0.5", "--d", "2", "--k", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("eigenvalues: 0.75,0.25"), std::string::npos) << r.out;
  r = invoke({"project", "--values", "4,1,1", "--k", "2", "--kind", "entropic"});
  EXPECT_NE(r.out.find("eigenvalues: 1,0.5,0.5"), std::string::npos) << r.out;
  r = invoke({"project", "--values", "0.55,0.45,0.3", "--k", "1", "--K", "2", "--kind", "rank"});
  EXPECT_NE(r.out.find("rank: 2"), std::string::npos) << r.out;
}

TEST(Round, ListsWeights) {
  const Outcome r = invoke({"round", "--values", "0.7,0.3", "--k", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("weight=0.7 span={e1}"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("weight=0.3 span={e2}"), std::string::npos) << r.out;
}

TEST(Ingest, RoundTripsThroughCache) {
  const fs::path dir = scratch("ingest");
  std::vector<std::uint8_t> payload(6 * 4);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i * 7);
  write_idx_u8(dir / "x.idx", payload, {6, 2, 2});
  const Outcome r = invoke({"ingest", (dir / "x.idx").string(), "-o", (dir / "x.bin").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("6 samples x 4 features"), std::string::npos);
  EXPECT_EQ(read_cache(dir / "x.bin").rows, load_idx(dir / "x.idx").rows);
}

TEST(Selftest, PassesAndReportsCounts) {
  const Outcome r = invoke({"selftest"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  std::size_t suites = 0;
  for (std::size_t pos = 0; (pos = r.out.find("PASS ", pos)) != std::string::npos; ++pos) ++suites;
  EXPECT_GE(suites, 5u);
  EXPECT_NE(r.out.find("1000/1000 instances"), std::string::npos);
}

TEST(Selftest, MutationIsCaught) {
  const Outcome r = invoke({"selftest", "--mutate-projection"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.out.find("FAIL capped-simplex"), std::string::npos);
}

}  // namespace
}  // namespace msgpca::cli
