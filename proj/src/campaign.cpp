#include "fracpile/campaign.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "fracpile/cli.hpp"
#include "fracpile/io.hpp"

namespace fracpile {

CampaignScript campaign_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CampaignScript script;
  if (!j.contains("entries") || !j["entries"].is_array())
    throw std::invalid_argument("campaign script: missing 'entries' array");
  for (const auto& e : j["entries"]) {
    CampaignEntry entry;
    entry.label = e.value("label", "");
    if (entry.label.empty()) throw std::invalid_argument("campaign entry without label");
    if (!e.contains("args")) throw std::invalid_argument("campaign entry without args");
    entry.args = e["args"].get<std::vector<std::string>>();
    entry.expect_exit = e.value("expect_exit", 0);
    script.entries.push_back(entry);
  }
  return script;
}

int run_campaign_file(const std::string& script_path, const std::string& out_dir,
                      std::uint64_t master_seed) {
  std::ifstream in(script_path);
  if (!in) throw std::invalid_argument("cannot open campaign script " + script_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  CampaignScript script = campaign_from_json(ss.str());
  std::filesystem::create_directories(out_dir);

  auto substitute = [&](std::string arg) {
    auto replace_all = [&arg](const std::string& from, const std::string& to) {
      for (size_t pos = 0; (pos = arg.find(from, pos)) != std::string::npos; pos += to.size())
        arg.replace(pos, from.size(), to);
    };
    replace_all("{out}", out_dir);
    replace_all("{seed}", std::to_string(master_seed));
    return arg;
  };

  // Summary rows: one per entry (exit codes) and one per --check gate with
  // its measured value, slurped from the <out>.gates.json the entry wrote.
  std::ostringstream csv;
  csv << "# schema: fracpile/campaign-summary/1\n";
  csv << "label,type,name,value,threshold,status\n";

  std::vector<CampaignOutcome> outcomes;
  bool all_pass = true;
  for (const CampaignEntry& entry : script.entries) {
    std::vector<std::string> args;
    std::string out_path;
    for (size_t i = 0; i < entry.args.size(); ++i) {
      args.push_back(substitute(entry.args[i]));
      if (entry.args[i] == "--out" && i + 1 < entry.args.size())
        out_path = substitute(entry.args[i + 1]);
    }
    std::string cmdline;
    for (const std::string& a : args) cmdline += (cmdline.empty() ? "" : " ") + a;
    std::cerr << "campaign: " << entry.label << ": fracpile " << cmdline << "\n";

    int rc = cli::run(args);
    CampaignOutcome oc;
    oc.label = entry.label;
    oc.command = cmdline;
    oc.exit_code = rc;
    oc.expected = entry.expect_exit;
    oc.pass = rc == entry.expect_exit;
    outcomes.push_back(oc);
    all_pass = all_pass && oc.pass;

    csv << oc.label << ",command,\"" << oc.command << "\"," << oc.exit_code << ","
        << oc.expected << "," << (oc.pass ? "pass" : "fail") << "\n";
    if (!out_path.empty()) {
      std::ifstream gates_in(out_path + ".gates.json");
      if (gates_in) {
        try {
          nlohmann::json gj = nlohmann::json::parse(gates_in);
          for (const auto& g : gj["gates"])
            csv << oc.label << ",gate," << g["gate"].get<std::string>() << ","
                << format_double(g["value"].get<double>()) << ","
                << format_double(g["threshold"].get<double>()) << ","
                << (g["pass"].get<bool>() ? "pass" : "fail") << "\n";
        } catch (const std::exception&) {
          csv << oc.label << ",gate,unreadable-gates-file,0,0,fail\n";
        }
      }
    }
    // Gate failures (exit 3) are collected; anything else unexpected is a
    // hard failure and aborts the campaign with context.
    if (!oc.pass && rc != 3) {
      std::cerr << "campaign: hard failure at '" << entry.label << "' (exit " << rc
                << ", expected " << entry.expect_exit << ")\n";
      break;
    }
  }
  atomic_write(std::filesystem::path(out_dir) / "summary.csv", csv.str());

  nlohmann::json manifest;
  manifest["schema_version"] = "fracpile/campaign-manifest/1";
  manifest["script"] = script_path;
  manifest["master_seed"] = master_seed;
  manifest["entries_run"] = outcomes.size();
  manifest["entries_total"] = script.entries.size();
  manifest["all_pass"] = all_pass && outcomes.size() == script.entries.size();
  atomic_write(std::filesystem::path(out_dir) / "campaign.manifest.json",
               manifest.dump(2));

  if (outcomes.size() != script.entries.size()) return 1;
  return all_pass ? 0 : 3;
}

}  // namespace fracpile
