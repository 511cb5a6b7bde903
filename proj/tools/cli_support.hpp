#pragma once
// Option plumbing shared by the subcommands: every option is registered
// once, so the resolved config can be dumped to meta.json and a JSON config
// can be checked for unknown keys and replayed as arguments.

#include "abclim/abc.hpp"
#include "abclim/io.hpp"
#include "abclim/mlp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace abclim::cli {

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

class Options {
public:
    explicit Options(CLI::App& app) : app_(&app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& help) {
        CLI::Option* opt = app_->add_option("--" + name, var, help);
        if constexpr (is_vector<T>::value) opt->delimiter(',');
        opt->capture_default_str();
        entries_.push_back({name, opt, [&var] { return nlohmann::json(var); }, false});
        return opt;
    }
    // Only dumped when given; used for --seed.
    CLI::Option* add_seed(std::uint64_t& seed) {
        CLI::Option* opt = app_->add_option("--seed", seed, "RNG seed (required for stochastic runs)");
        entries_.push_back({"seed", opt, [&seed] { return nlohmann::json(seed); }, true});
        seed_ = opt;
        return opt;
    }
    void require_seed(const std::string& why) const;

    bool known(const std::string& key) const;
    nlohmann::json resolved() const;
    CLI::App& app() { return *app_; }
    const CLI::App& app() const { return *app_; }

private:
    struct Entry {
        std::string name;
        CLI::Option* opt;
        std::function<nlohmann::json()> dump;
        bool only_if_given;
    };
    CLI::App* app_;
    std::vector<Entry> entries_;
    CLI::Option* seed_ = nullptr;
};

// Turns a config object into "--key value" arguments. Throws
// std::invalid_argument naming the first unknown key.
std::vector<std::string> config_arguments(const nlohmann::json& config, const Options& opts);

// --param NAME --L n [--a list --b list --c q]
struct ParamSpec {
    std::string name = "MUP";
    int L = 1;
    std::vector<std::string> a, b;
    std::string c;
    void add(Options& o);
    AbcParam build() const;
};

// Routine from --xs/--ys (scalar), --data FILE (CSV with x* and y* columns)
// or --random N (+-1 entries of the given dims, drawn from --data-seed).
struct RoutineSpec {
    std::string prefix;
    std::vector<double> xs, ys;
    std::string data;
    int random = 0;
    int dim = 1, out_dim = 1;
    std::uint64_t data_seed = 0;
    double eta = 0.01;
    std::string loss = "mse";
    int batch = 1;
    void add(Options& o);
    TrainRoutine build() const;
};

Loss parse_loss(const std::string& s);

// Probe list: consecutive groups of `dim` values; empty = routine inputs.
std::vector<Eigen::VectorXd> probe_inputs(const std::vector<double>& flat, int dim, const TrainRoutine& routine);

struct Output {
    std::filesystem::path dir = ".";
    void add(Options& o);
    void write(const std::string& file, const std::string& text) const;
    void write(const std::string& file, const Table& table) const;
    void write_meta(const std::string& command, const Options& opts, const nlohmann::json& result) const;
};

nlohmann::json versions();

}  // namespace abclim::cli
