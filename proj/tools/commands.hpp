#pragma once

#include "cli_support.hpp"

#include <memory>
#include <string>
#include <vector>

namespace abclim::cli {

class Command {
public:
    virtual ~Command() = default;

    void attach(CLI::App& root, const std::string& name, const std::string& help) {
        name_ = name;
        app_ = root.add_subcommand(name, help);
        opts_ = std::make_unique<Options>(*app_);
        out_.add(*opts_);
        configure(*opts_);
    }
    virtual void run() = 0;

    const std::string& name() const { return name_; }
    CLI::App& app() { return *app_; }
    Options& options() { return *opts_; }

protected:
    virtual void configure(Options& o) = 0;
    void finish(const nlohmann::json& result = nullptr) const { out_.write_meta(name_, *opts_, result); }

    std::string name_;
    CLI::App* app_ = nullptr;
    std::unique_ptr<Options> opts_;
    Output out_;
    std::uint64_t seed_ = 0;
};

std::vector<std::unique_ptr<Command>> make_commands(CLI::App& root);

}  // namespace abclim::cli
