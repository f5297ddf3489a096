#include "grif/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace grif {

namespace {

enum class Kind { Int, Real, Bool, Str, Enum };

struct KeySpec {
    Kind kind;
    const char* def;
    std::vector<std::string> choices;  // Enum only
};

// The schema. Hyperparameters cover the optimizer schedule, batch sizes,
// temperature, policy sigma, relabeling probability, and the joint-loss
// weight, plus dataset and evaluation shape.
const std::map<std::string, KeySpec>& schema() {
    static const std::map<std::string, KeySpec> s = {
        {"data.grid_w", {Kind::Int, "12", {}}},
        {"data.grid_h", {Kind::Int, "12", {}}},
        {"data.horizon", {Kind::Int, "40", {}}},
        {"data.n_labeled", {Kind::Int, "500", {}}},
        {"data.n_unlabeled", {Kind::Int, "3000", {}}},
        {"data.ratio_mode", {Kind::Bool, "false", {}}},
        {"data.heldout_eval_count", {Kind::Int, "192", {}}},
        {"data.db_action_noise", {Kind::Real, "0.0", {}}},
        {"data.train_scenes", {Kind::Str, "train0,train1,train2,train3,train4,train5", {}}},
        {"data.eval_scenes", {Kind::Str, "evalA,evalB,evalC", {}}},
        {"data.held_out",
         {Kind::Str, "place_on:pepper,place_on:mushroom,move_dir:towel,move_dir:pan,move_relative:knife,move_relative:spoon", {}}},
        {"data.n_paraphrases", {Kind::Int, "5", {}}},
        {"data.pretrain_scenes", {Kind::Int, "420", {}}},

        {"pretrain.steps", {Kind::Int, "600", {}}},
        {"pretrain.batch", {Kind::Int, "64", {}}},
        {"pretrain.tau", {Kind::Real, "0.1", {}}},

        {"align.tau", {Kind::Real, "0.1", {}}},
        {"align.batch", {Kind::Int, "128", {}}},
        {"align.steps", {Kind::Int, "4000", {}}},

        {"policy.sigma", {Kind::Real, "0.1", {}}},
        {"policy.batch", {Kind::Int, "64", {}}},
        {"policy.steps", {Kind::Int, "8000", {}}},
        {"policy.mode", {Kind::Enum, "frozen", {"frozen", "joint"}}},
        {"policy.align_weight", {Kind::Real, "1.0", {}}},
        {"policy.align_loss", {Kind::Enum, "infonce", {"infonce", "cosine", "none"}}},
        {"policy.relabel_final_prob", {Kind::Real, "0.5", {}}},
        {"policy.explicit_weights", {Kind::Bool, "false", {}}},
        {"policy.use_unlabeled", {Kind::Bool, "true", {}}},
        {"policy.language_only", {Kind::Bool, "false", {}}},
        {"policy.goal_mode", {Kind::Enum, "transition", {"transition", "goal_duplicate", "goal_single"}}},

        {"optim.beta1", {Kind::Real, "0.9", {}}},
        {"optim.beta2", {Kind::Real, "0.999", {}}},
        {"optim.epsilon", {Kind::Real, "1e-8", {}}},
        {"optim.peak_lr", {Kind::Real, "3e-4", {}}},
        {"optim.encoder_peak_lr", {Kind::Real, "3e-4", {}}},
        {"optim.warmup_steps", {Kind::Int, "2000", {}}},
        {"optim.decay_steps", {Kind::Int, "2000000", {}}},

        {"eval.retrieval_batch", {Kind::Int, "64", {}}},
        {"eval.trials", {Kind::Int, "10", {}}},
        {"eval.trials_small", {Kind::Int, "5", {}}},
        {"eval.horizon", {Kind::Int, "60", {}}},

        {"ablate.variants",
         {Kind::Str, "grif_frozen,grif_joint,grif_labeled,no_align,no_start,no_pretrain,lcbc,llfp", {}}},
        {"ablate.sweep", {Kind::Bool, "true", {}}},
        {"ablate.sweep_counts", {Kind::Str, "50,150,300,500", {}}},
        {"ablate.no_start_mode", {Kind::Enum, "duplicate", {"duplicate", "single"}}},
    };
    return s;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_line(int line, const std::string& msg) {
    throw std::runtime_error("config: line " + std::to_string(line) + ": " + msg);
}

void validate(const std::string& key, const std::string& value, int line) {
    auto it = schema().find(key);
    if (it == schema().end()) bad_line(line, "unknown key '" + key + "'");
    const KeySpec& spec = it->second;
    switch (spec.kind) {
        case Kind::Int: {
            int64_t v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size())
                bad_line(line, "key '" + key + "' expects an integer, got '" + value + "'");
            break;
        }
        case Kind::Real: {
            try {
                size_t pos = 0;
                (void)std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument("");
            } catch (...) {
                bad_line(line, "key '" + key + "' expects a real number, got '" + value + "'");
            }
            break;
        }
        case Kind::Bool:
            if (value != "true" && value != "false")
                bad_line(line, "key '" + key + "' expects true/false, got '" + value + "'");
            break;
        case Kind::Enum:
            if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
                std::string opts;
                for (const auto& c : spec.choices) opts += (opts.empty() ? "" : "|") + c;
                bad_line(line, "key '" + key + "' expects one of {" + opts + "}, got '" + value + "'");
            }
            break;
        case Kind::Str:
            break;
    }
}

}  // namespace

Config::Config() {
    for (const auto& [key, spec] : schema()) values_[key] = spec.def;
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string stripped = trim(raw);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) bad_line(line, "expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) bad_line(line, "empty key");
        validate(key, value, line);
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(text);
}

int64_t Config::get_int(const std::string& key) const {
    const std::string& v = get_str(key);
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::runtime_error("config: key '" + key + "' is not an integer");
    return out;
}

double Config::get_real(const std::string& key) const { return std::stod(get_str(key)); }

bool Config::get_bool(const std::string& key) const { return get_str(key) == "true"; }

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("config: unknown key '" + key + "'");
    return it->second;
}

void Config::set(const std::string& key, const std::string& value) {
    validate(key, value, 0);
    values_[key] = value;
}

std::string Config::resolved_text() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

uint64_t Config::hash() const {
    uint64_t h = 0xCBF2'9CE4'8422'2325ULL;
    for (char c : resolved_text()) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100'0000'01B3ULL;
    }
    return h;
}

void Config::save_resolved(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("config: cannot write '" + path + "'");
    f << resolved_text();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    while (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

}  // namespace grif
