#pragma once

#include <string>

#include <json.hpp>

namespace pgs {

// Experiment commands behind a uniform JSON-options interface. Each command
// validates its options, writes its artifacts, and returns a manifest-style
// JSON describing exactly what was produced. Commands that own an output
// directory (simulate, train, inspect) also persist that JSON as
// <out>/manifest.json; rerunning any command with identical options yields
// bit-identical artifacts.
using Json = nlohmann::json;

Json cmd_simulate(const Json& opt);
Json cmd_fish(const Json& opt);
Json cmd_train(const Json& opt);
Json cmd_fuse(const Json& opt);
Json cmd_evaluate(const Json& opt);
Json cmd_inspect(const Json& opt);

// Dispatch by command name; unknown names raise ConfigError.
Json run_command(const std::string& name, const Json& opt);

}  // namespace pgs
