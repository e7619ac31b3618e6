#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace msgpca::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

struct RunOptions {
  std::string algo = "msg";
  std::string dist = "orthogonal";
  std::string data;
  long long dim = 32;
  double tau = 1.1;
  long long k = 0;
  long long rank_cap = 0;
  long long iterations = 0;
  std::string schedule = "decaying";
  double c = 1.0;
  std::uint64_t seed = 0;
  bool averaging = false;
  bool rounding = false;
  std::string output = "trace.csv";
};

struct ExperimentOptions {
  std::string spec;
  std::string output;
  unsigned threads = 0;
};

struct ProjectOptions {
  std::vector<double> values;
  long long k = 0;
  long long rank_cap = 0;
  long long dim = 0;
  std::string kind = "simplex";
};

struct RoundOptions {
  std::vector<double> values;
  long long k = 0;
  std::uint64_t seed = 0;
};

struct IngestOptions {
  std::string input;
  std::string output;
  bool normalize = false;
  std::uint64_t seed = 0;
};

struct SelftestOptions {
  long long instances = 1000;
  std::uint64_t seed = 0;
  bool mutate_projection = false;
};

// Parser plus the option storage it writes into.
class Cli {
 public:
  Cli();
  ~Cli();
  Cli(const Cli&) = delete;
  Cli& operator=(const Cli&) = delete;

  CLI::App& app() { return *app_; }

  // Parses `args` (without the program name) and runs the chosen
  // subcommand. Returns the process exit code.
  int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

 private:
  int dispatch(std::ostream& out, std::ostream& err);

  std::unique_ptr<CLI::App> app_;
  int verbosity_ = 0;
  RunOptions run_;
  ExperimentOptions experiment_;
  ProjectOptions project_;
  RoundOptions round_;
  IngestOptions ingest_;
  SelftestOptions selftest_;
};

int run_selftest(const SelftestOptions& options, std::ostream& out);

}  // namespace msgpca::cli
