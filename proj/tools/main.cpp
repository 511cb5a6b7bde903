#include "commands.hpp"

#include <algorithm>
#include <iostream>

using namespace abclim;
using namespace abclim::cli;

namespace {

bool is_command_line_key(const std::vector<std::string>& args, const std::string& config_arg) {
    const std::string key = config_arg.substr(0, config_arg.find('='));
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == key || a.rfind(key + "=", 0) == 0;
    });
}

// Replaces --config FILE by the file's keys as arguments. Keys given on the
// command line win. Accepts a flat object or a meta.json from an earlier run.
std::vector<std::string> expand_config(std::vector<std::string> args,
                                       const std::vector<std::unique_ptr<Command>>& cmds) {
    std::string path;
    for (auto it = args.begin(); it != args.end(); ++it) {
        if (*it == "--config") {
            if (it + 1 == args.end()) throw std::invalid_argument("--config needs a file");
            path = *(it + 1);
            args.erase(it, it + 2);
            break;
        }
        if (it->rfind("--config=", 0) == 0) {
            path = it->substr(9);
            args.erase(it);
            break;
        }
    }
    if (path.empty()) return args;

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument(path + ": expected a JSON object");

    auto named = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.empty() || a[0] != '-'; });
    std::string command = named != args.end() ? *named : "";
    if (j.contains("command")) {
        const std::string from_file = j["command"].get<std::string>();
        if (!command.empty() && command != from_file)
            throw std::invalid_argument(path + ": config is for '" + from_file + "', not '" + command + "'");
        command = from_file;
    }
    if (command.empty()) throw std::invalid_argument(path + ": no command given");
    if (named != args.end()) args.erase(named);

    nlohmann::json config;
    if (j.contains("config")) {
        for (const auto& [key, value] : j.items())
            if (key != "command" && key != "config" && key != "versions" && key != "result")
                throw std::invalid_argument(path + ": unknown top-level key '" + key + "'");
        config = j["config"];
    } else {
        config = j;
        config.erase("command");
    }
    auto cmd = std::find_if(cmds.begin(), cmds.end(), [&](const auto& c) { return c->name() == command; });
    if (cmd == cmds.end()) throw std::invalid_argument(path + ": unknown command '" + command + "'");

    std::vector<std::string> out{command};
    for (auto& a : config_arguments(config, (*cmd)->options()))
        if (!is_command_line_key(args, a)) out.push_back(std::move(a));
    out.insert(out.end(), args.begin(), args.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"abc-parametrized MLPs: classification, finite and infinite-width training, task drivers", "abclim"};
    app.require_subcommand(1);
    app.footer("--config FILE reads options from a JSON object (or a previous meta.json).\n"
               "ABCLIM_THREADS caps worker threads.");
    const auto cmds = make_commands(app);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(std::move(args), cmds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    for (const auto& c : cmds) {
        if (!c->app().parsed()) continue;
        try {
            c->run();
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 0;
}
