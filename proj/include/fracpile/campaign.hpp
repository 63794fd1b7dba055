#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fracpile {

// One scripted CLI invocation and the exit code it must produce.
struct CampaignEntry {
  std::string label;
  std::vector<std::string> args;
  int expect_exit = 0;
};

struct CampaignScript {
  std::vector<CampaignEntry> entries;
};

CampaignScript campaign_from_json(const std::string& text);

struct CampaignOutcome {
  std::string label;
  std::string command;
  int exit_code = 0;
  int expected = 0;
  bool pass = false;
};

// Runs every entry in order (in process), substituting {out} with the output
// directory and {seed} with the master seed in each argument.  A gate failure
// (exit 3 where 0 was expected) is recorded and the campaign continues; any
// other unexpected exit aborts with context.  Returns 0 iff everything passed,
// and writes summary.csv into out_dir.
int run_campaign_file(const std::string& script_path, const std::string& out_dir,
                      std::uint64_t master_seed);

}  // namespace fracpile
