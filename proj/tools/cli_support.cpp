#include "cli_support.hpp"

#include "abclim/rng.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <gsl/gsl_version.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace abclim::cli {

void Options::require_seed(const std::string& why) const {
    if (seed_ == nullptr || seed_->count() == 0)
        throw std::invalid_argument("--seed is required (" + why + ")");
}

bool Options::known(const std::string& key) const {
    for (const auto& e : entries_)
        if (e.name == key) return true;
    return false;
}

nlohmann::json Options::resolved() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& e : entries_) {
        if (e.only_if_given && e.opt->count() == 0) continue;
        j[e.name] = e.dump();
    }
    return j;
}

namespace {

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
    switch (v.type()) {
        case nlohmann::json::value_t::string: return v.get<std::string>();
        case nlohmann::json::value_t::boolean: return v.get<bool>() ? "true" : "false";
        case nlohmann::json::value_t::number_integer:
        case nlohmann::json::value_t::number_unsigned:
        case nlohmann::json::value_t::number_float: return v.dump();
        default: throw std::invalid_argument("config key '" + key + "': expected a scalar or a list of scalars");
    }
}

}  // namespace

std::vector<std::string> config_arguments(const nlohmann::json& config, const Options& opts) {
    if (!config.is_object()) throw std::invalid_argument("config must be a JSON object");
    std::vector<std::string> args;
    for (const auto& [key, value] : config.items()) {
        if (!opts.known(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
        std::string text;
        if (value.is_array()) {
            for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + scalar_text(value[i], key);
            if (value.empty()) continue;  // an empty list is the default
        } else {
            text = scalar_text(value, key);
        }
        args.push_back("--" + key + "=" + text);
    }
    return args;
}

void ParamSpec::add(Options& o) {
    o.add("param", name, "named parametrization: SP, NTP, MFP, MUP");
    o.add("L", L, "hidden layers");
    o.add("a", a, "override a_1..a_{L+1} (rationals)");
    o.add("b", b, "override b_1..b_{L+1} (rationals)");
    o.add("c", c, "override c (rational)");
}

AbcParam ParamSpec::build() const {
    AbcParam p = named_param(name, L);
    auto fill = [&](const std::vector<std::string>& src, std::vector<Rational>& dst, const char* what) {
        if (src.empty()) return;
        if (src.size() != dst.size())
            throw std::invalid_argument(std::string("--") + what + " needs " + std::to_string(dst.size()) + " entries");
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = parse_rational(src[i]);
    };
    fill(a, p.a, "a");
    fill(b, p.b, "b");
    if (!c.empty()) p.c = parse_rational(c);
    p.validate();
    return p;
}

Loss parse_loss(const std::string& s) {
    if (s == "mse") return Loss::mse;
    if (s == "logistic") return Loss::logistic;
    if (s == "softmax") return Loss::softmax;
    throw std::invalid_argument("unknown loss '" + s + "'");
}

void RoutineSpec::add(Options& o) {
    o.add(prefix + "xs", xs, "scalar training inputs");
    o.add(prefix + "ys", ys, "scalar training targets");
    o.add(prefix + "data", data, "CSV with x* input and y* target columns");
    o.add(prefix + "random", random, "number of random +-1 examples");
    o.add(prefix + "dim", dim, "input dim of random examples");
    o.add(prefix + "out-dim", out_dim, "target dim of random examples");
    o.add(prefix + "data-seed", data_seed, "seed of the random examples");
    o.add(prefix + "eta", eta, "learning rate");
    o.add(prefix + "loss", loss, "mse, logistic or softmax");
    o.add(prefix + "batch", batch, "batch size");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    return out;
}

void read_data_csv(const std::string& path, TrainRoutine& r) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    const auto header = split(line, ',');
    std::vector<std::size_t> xcol, ycol;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!header[i].empty() && header[i][0] == 'x') xcol.push_back(i);
        else if (!header[i].empty() && header[i][0] == 'y') ycol.push_back(i);
        else throw std::invalid_argument(path + ": column '" + header[i] + "' is neither x* nor y*");
    }
    if (xcol.empty() || ycol.empty()) throw std::invalid_argument(path + ": need x* and y* columns");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields");
        Eigen::VectorXd x(static_cast<Eigen::Index>(xcol.size())), y(static_cast<Eigen::Index>(ycol.size()));
        try {
            for (std::size_t i = 0; i < xcol.size(); ++i) x[static_cast<Eigen::Index>(i)] = std::stod(cells[xcol[i]]);
            for (std::size_t i = 0; i < ycol.size(); ++i) y[static_cast<Eigen::Index>(i)] = std::stod(cells[ycol[i]]);
        } catch (const std::logic_error&) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": not a number");
        }
        r.inputs.push_back(x);
        r.targets.push_back(y);
    }
}

}  // namespace

TrainRoutine RoutineSpec::build() const {
    TrainRoutine r;
    r.eta = eta;
    r.loss = parse_loss(loss);
    r.batch_size = batch;
    const int sources = (!xs.empty() || !ys.empty()) + !data.empty() + (random > 0);
    if (sources != 1)
        throw std::invalid_argument("give exactly one of --" + prefix + "xs/--" + prefix + "ys, --" + prefix +
                                    "data, --" + prefix + "random");
    if (!xs.empty() || !ys.empty()) {
        if (xs.size() != ys.size()) throw std::invalid_argument("--" + prefix + "xs and --" + prefix + "ys differ in length");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            r.inputs.push_back(Eigen::VectorXd::Constant(1, xs[i]));
            r.targets.push_back(Eigen::VectorXd::Constant(1, ys[i]));
        }
    } else if (!data.empty()) {
        read_data_csv(data, r);
    } else {
        Rng rng(data_seed);
        for (int i = 0; i < random; ++i) {
            Eigen::VectorXd x(dim), y(out_dim);
            for (auto& v : x) v = rng.below(2) ? 1.0 : -1.0;
            for (auto& v : y) v = rng.below(2) ? 1.0 : -1.0;
            r.inputs.push_back(x);
            r.targets.push_back(y);
        }
    }
    if (batch < 1) throw std::invalid_argument("--" + prefix + "batch must be positive");
    return r;
}

std::vector<Eigen::VectorXd> probe_inputs(const std::vector<double>& flat, int dim, const TrainRoutine& routine) {
    if (flat.empty()) {
        std::vector<Eigen::VectorXd> out;
        for (const auto& x : routine.inputs)
            if (std::find_if(out.begin(), out.end(), [&](const auto& y) { return y == x; }) == out.end())
                out.push_back(x);
        return out;
    }
    if (dim < 1 || flat.size() % static_cast<std::size_t>(dim) != 0)
        throw std::invalid_argument("--probes length must be a multiple of the input dim");
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < flat.size(); i += static_cast<std::size_t>(dim))
        out.push_back(Eigen::Map<const Eigen::VectorXd>(flat.data() + i, dim));
    return out;
}

void Output::add(Options& o) {
    CLI::Option* opt = o.app().add_option("--out", dir, "output directory");
    opt->capture_default_str();
}

void Output::write(const std::string& file, const std::string& text) const {
    std::filesystem::create_directories(dir);
    write_text_file(dir / file, text);
}

void Output::write(const std::string& file, const Table& table) const {
    std::ostringstream os;
    table.write_csv(os);
    write(file, os.str());
}

void Output::write_meta(const std::string& command, const Options& opts, const nlohmann::json& result) const {
    nlohmann::json meta;
    meta["command"] = command;
    meta["config"] = opts.resolved();
    meta["versions"] = versions();
    if (!result.is_null()) meta["result"] = result;
    write("meta.json", meta.dump(2) + "\n");
}

nlohmann::json versions() {
    nlohmann::json v;
    v["abclim"] = ABCLIM_VERSION;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["boost"] = BOOST_LIB_VERSION;
    v["gsl"] = GSL_VERSION;
    v["compiler"] = __VERSION__;
    return v;
}

}  // namespace abclim::cli
