#pragma once

#include <istream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace abfr::cli {

// Reads a JSON config file: top-level keys are flag names of the main command,
// nested objects keyed by subcommand name hold that subcommand's flags.
//   {"extract": {"anchors": "grid", "sizes": [8, 12, 16]}}
class ConfigJson : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto name = opt->get_lnames()[0];
      if (opt->get_type_size() != 0) {
        if (opt->count() == 1)
          j[name] = opt->results().at(0);
        else if (opt->count() > 1)
          j[name] = opt->results();
        else if (default_also && !opt->get_default_str().empty())
          j[name] = opt->get_default_str();
      } else if (opt->count() > 0) {
        j[name] = true;
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) j[sub->get_name()] = nlohmann::json::parse(to_config(sub, default_also, false, ""));
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    return items_from(j, "", {});
  }

 private:
  static std::string scalar(const nlohmann::json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config value for '" + name + "' must be a string, number, boolean or list of them");
  }

  static std::vector<CLI::ConfigItem> items_from(const nlohmann::json& j, const std::string& name,
                                                 const std::vector<std::string>& prefix) {
    std::vector<CLI::ConfigItem> out;
    if (j.is_object()) {
      auto child_prefix = prefix;
      if (!name.empty()) child_prefix.push_back(name);
      for (const auto& [key, value] : j.items()) {
        auto sub = items_from(value, key, child_prefix);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return out;
    }
    CLI::ConfigItem item;
    item.name = name;
    item.parents = prefix;
    if (j.is_array()) {
      for (const auto& v : j) item.inputs.push_back(scalar(v, name));
    } else {
      item.inputs.push_back(scalar(j, name));
    }
    out.push_back(std::move(item));
    return out;
  }
};

}  // namespace abfr::cli
