#include "taskvid/config.hpp"

#include <fstream>
#include <sstream>

#include "taskvid/errors.hpp"

namespace taskvid {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

int64_t to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ValidationError("config: " + key + " expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ValidationError("config: " + key + " expects a number, got '" + v + "'");
    }
}

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_toml_subset(const std::string& text) {
    std::map<std::string, std::map<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config: malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: expected key = value at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = unquote(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ValidationError("config: empty key at line " + std::to_string(lineno));
        if (!out[section].emplace(key, val).second)
            throw ValidationError("config: duplicate key '" + key + "' in [" + section + "]");
    }
    return out;
}

TrainRunConfig ExperimentConfig::run() const {
    TrainRunConfig r;
    r.steps = steps;
    r.batch = batch;
    r.seed = seed;
    r.eval_every = eval_every;
    r.optim = optim;
    r.interp = interp;
    r.corpus_size = corpus_size;
    r.data_seed = data_seed;
    return r;
}

uint64_t ExperimentConfig::hash() const {
    std::ostringstream os;
    os << model.to_json() << '|' << beta_start << '|' << beta_end << '|' << lora.rank << '|'
       << lora.alpha << '|' << target_spec_name(lora.targets) << '|' << lora.seed << '|'
       << interp_variant_name(interp.variant) << '|' << interp.tiles_rows << 'x' << interp.tiles_cols
       << '|' << optim.lr << '|' << optim.beta1 << '|' << optim.beta2 << '|' << optim.eps << '|'
       << optim.weight_decay << '|' << optim.max_grad_norm << '|' << steps << '|' << batch << '|' << seed
       << '|' << eval_every << '|' << corpus_size << '|' << data_seed << '|' << infer_steps;
    return fnv1a64(os.str());
}

ExperimentConfig default_experiment_config() { return ExperimentConfig{}; }

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_experiment_config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto sections = parse_toml_subset(buf.str());

    ExperimentConfig cfg;
    for (const auto& [section, kv] : sections) {
        for (const auto& [key, val] : kv) {
            std::string q = section + "." + key;
            if (section == "model") {
                if (key == "frames") cfg.model.frames = static_cast<int>(to_int(q, val));
                else if (key == "height") cfg.model.height = static_cast<int>(to_int(q, val));
                else if (key == "width") cfg.model.width = static_cast<int>(to_int(q, val));
                else if (key == "patch") cfg.model.patch = static_cast<int>(to_int(q, val));
                else if (key == "dim") cfg.model.dim = static_cast<int>(to_int(q, val));
                else if (key == "heads") cfg.model.heads = static_cast<int>(to_int(q, val));
                else if (key == "blocks") cfg.model.blocks = static_cast<int>(to_int(q, val));
                else if (key == "tsteps") cfg.model.tsteps = static_cast<int>(to_int(q, val));
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "schedule") {
                if (key == "beta_start") cfg.beta_start = to_double(q, val);
                else if (key == "beta_end") cfg.beta_end = to_double(q, val);
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "lora") {
                if (key == "rank") cfg.lora.rank = static_cast<int>(to_int(q, val));
                else if (key == "alpha") cfg.lora.alpha = to_double(q, val);
                else if (key == "seed") cfg.lora.seed = static_cast<uint64_t>(to_int(q, val));
                else if (key == "targets") {
                    auto t = target_spec_from_name(val);
                    if (!t) throw ValidationError("config: unknown lora target set '" + val + "'");
                    cfg.lora.targets = *t;
                } else throw ValidationError("config: unknown key " + q);
            } else if (section == "interp") {
                if (key == "method") {
                    auto m = interp_variant_from_name(val);
                    if (!m) throw ValidationError("config: unknown interpolation method '" + val + "'");
                    cfg.interp.variant = *m;
                } else if (key == "tiles_rows") cfg.interp.tiles_rows = static_cast<int>(to_int(q, val));
                else if (key == "tiles_cols") cfg.interp.tiles_cols = static_cast<int>(to_int(q, val));
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "optim") {
                if (key == "lr") cfg.optim.lr = to_double(q, val);
                else if (key == "beta1") cfg.optim.beta1 = to_double(q, val);
                else if (key == "beta2") cfg.optim.beta2 = to_double(q, val);
                else if (key == "eps") cfg.optim.eps = to_double(q, val);
                else if (key == "weight_decay") cfg.optim.weight_decay = to_double(q, val);
                else if (key == "max_grad_norm") cfg.optim.max_grad_norm = to_double(q, val);
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "train") {
                if (key == "steps") cfg.steps = static_cast<int>(to_int(q, val));
                else if (key == "batch") cfg.batch = static_cast<int>(to_int(q, val));
                else if (key == "seed") cfg.seed = static_cast<uint64_t>(to_int(q, val));
                else if (key == "eval_every") cfg.eval_every = static_cast<int>(to_int(q, val));
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "data") {
                if (key == "corpus_size") cfg.corpus_size = static_cast<int>(to_int(q, val));
                else if (key == "seed") cfg.data_seed = static_cast<uint64_t>(to_int(q, val));
                else throw ValidationError("config: unknown key " + q);
            } else if (section == "infer") {
                if (key == "steps") cfg.infer_steps = static_cast<int>(to_int(q, val));
                else throw ValidationError("config: unknown key " + q);
            } else {
                throw ValidationError("config: unknown section [" + section + "]");
            }
        }
    }
    cfg.model.validate();
    return cfg;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("save_experiment_config: cannot open " + path);
    out << "[model]\n"
        << "frames = " << cfg.model.frames << "\n"
        << "height = " << cfg.model.height << "\n"
        << "width = " << cfg.model.width << "\n"
        << "patch = " << cfg.model.patch << "\n"
        << "dim = " << cfg.model.dim << "\n"
        << "heads = " << cfg.model.heads << "\n"
        << "blocks = " << cfg.model.blocks << "\n"
        << "tsteps = " << cfg.model.tsteps << "\n\n"
        << "[schedule]\n"
        << "beta_start = " << cfg.beta_start << "\n"
        << "beta_end = " << cfg.beta_end << "\n\n"
        << "[lora]\n"
        << "rank = " << cfg.lora.rank << "\n"
        << "alpha = " << cfg.lora.alpha << "\n"
        << "targets = \"" << target_spec_name(cfg.lora.targets) << "\"\n"
        << "seed = " << cfg.lora.seed << "\n\n"
        << "[interp]\n"
        << "method = \"" << interp_variant_name(cfg.interp.variant) << "\"\n"
        << "tiles_rows = " << cfg.interp.tiles_rows << "\n"
        << "tiles_cols = " << cfg.interp.tiles_cols << "\n\n"
        << "[optim]\n"
        << "lr = " << cfg.optim.lr << "\n"
        << "beta1 = " << cfg.optim.beta1 << "\n"
        << "beta2 = " << cfg.optim.beta2 << "\n"
        << "eps = " << cfg.optim.eps << "\n"
        << "weight_decay = " << cfg.optim.weight_decay << "\n"
        << "max_grad_norm = " << cfg.optim.max_grad_norm << "\n\n"
        << "[train]\n"
        << "steps = " << cfg.steps << "\n"
        << "batch = " << cfg.batch << "\n"
        << "seed = " << cfg.seed << "\n"
        << "eval_every = " << cfg.eval_every << "\n\n"
        << "[data]\n"
        << "corpus_size = " << cfg.corpus_size << "\n"
        << "seed = " << cfg.data_seed << "\n\n"
        << "[infer]\n"
        << "steps = " << cfg.infer_steps << "\n";
}

}  // namespace taskvid
