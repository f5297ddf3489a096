#include "grif/instructions.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>

namespace grif::lang {

namespace {

const std::vector<std::string>& vocab_list() {
    static const std::vector<std::string> v = {
        "<unk>",
        // glue
        "a", "the", "scene", "with", "and", "to", "on", "onto", "next", "in", "front",
        "of", "top", "beside", "near", "toward",
        // verbs
        "put", "place", "move", "set", "drop", "lay", "push", "slide", "shift", "bring", "position",
        // directions
        "left", "right", "back",
        // objects
        "pepper", "pan", "knife", "cloth", "pot", "mushroom", "spoon", "towel",
    };
    return v;
}

const std::map<std::string, int>& vocab_index() {
    static const std::map<std::string, int> idx = [] {
        std::map<std::string, int> m;
        const auto& v = vocab_list();
        for (size_t i = 0; i < v.size(); ++i) m[v[i]] = static_cast<int>(i);
        return m;
    }();
    return idx;
}

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        words.push_back(w);
    }
    return words;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

// One paraphrase rule: ordered single-word -> phrase substitutions applied to
// the canonical word sequence. Only the first occurrence of each source word
// is rewritten ("the" is never a source).
using Rule = std::vector<std::pair<std::string, std::string>>;

std::string apply_rule(const std::vector<std::string>& words, const Rule& rule) {
    std::vector<std::string> out = words;
    for (const auto& [from, to] : rule) {
        for (size_t i = 0; i < out.size(); ++i) {
            if (out[i] == from) {
                const auto repl = words_of(to);
                out.erase(out.begin() + static_cast<long>(i));
                out.insert(out.begin() + static_cast<long>(i), repl.begin(), repl.end());
                break;
            }
        }
    }
    return join(out);
}

const std::array<Rule, 5>& rules_place_on() {
    static const std::array<Rule, 5> r = {{
        {{"put", "place"}},
        {{"put", "set"}},
        {{"on", "onto"}},
        {{"put", "drop"}, {"on", "onto"}},
        {{"put", "lay"}, {"on", "on top of"}},
    }};
    return r;
}
const std::array<Rule, 5>& rules_move_dir() {
    static const std::array<Rule, 5> r = {{
        {{"move", "push"}},
        {{"move", "slide"}},
        {{"move", "shift"}},
        {{"to", "toward"}},
        {{"move", "bring"}},
    }};
    return r;
}
const std::array<Rule, 5>& rules_next_to() {
    static const std::array<Rule, 5> r = {{
        {{"place", "put"}},
        {{"place", "move"}},
        {{"next", "beside"}, {"to", ""}},
        {{"place", "set"}, {"next", "beside"}, {"to", ""}},
        {{"place", "position"}, {"next", "near"}, {"to", ""}},
    }};
    return r;
}
const std::array<Rule, 5>& rules_in_front_of() {
    static const std::array<Rule, 5> r = {{
        {{"place", "put"}},
        {{"place", "move"}},
        {{"place", "set"}},
        {{"place", "position"}},
        {{"place", "bring"}},
    }};
    return r;
}

}  // namespace

int vocab_size() { return static_cast<int>(vocab_list().size()); }

const std::vector<std::string>& vocabulary() { return vocab_list(); }

std::vector<int> tokenize(const std::string& instruction) {
    const auto words = words_of(instruction);
    if (words.empty()) throw std::invalid_argument("tokenize: empty instruction");
    std::vector<int> ids;
    ids.reserve(words.size());
    const auto& idx = vocab_index();
    for (const auto& w : words) {
        auto it = idx.find(w);
        ids.push_back(it == idx.end() ? kUnkId : it->second);
    }
    return ids;
}

std::string make_instruction(const sim::TaskSpec& task) {
    const std::string subj = sim::type_name(static_cast<sim::ObjectType>(task.subject));
    switch (task.kind) {
        case sim::TaskKind::place_on:
            return "put the " + subj + " on the " + sim::type_name(static_cast<sim::ObjectType>(task.target_type));
        case sim::TaskKind::move_dir: {
            static const char* dirs[4] = {"left", "right", "front", "back"};
            return "move the " + subj + " to the " + dirs[task.direction];
        }
        case sim::TaskKind::move_relative: {
            const std::string ref = sim::type_name(static_cast<sim::ObjectType>(task.ref_type));
            if (static_cast<sim::Relation>(task.relation) == sim::Relation::in_front_of)
                return "place the " + subj + " in front of the " + ref;
            return "place the " + subj + " next to the " + ref;
        }
    }
    throw std::invalid_argument("make_instruction: bad task kind");
}

std::array<std::string, 5> paraphrases(const std::string& instruction) {
    const auto words = words_of(instruction);
    if (words.empty()) throw std::invalid_argument("paraphrases: empty instruction");

    const std::array<Rule, 5>* rules = nullptr;
    if (!words.empty() && words[0] == "put") rules = &rules_place_on();
    else if (!words.empty() && words[0] == "move") rules = &rules_move_dir();
    else if (std::find(words.begin(), words.end(), "next") != words.end()) rules = &rules_next_to();
    else if (std::find(words.begin(), words.end(), "front") != words.end()) rules = &rules_in_front_of();
    if (!rules) throw std::invalid_argument("paraphrases: unrecognized instruction '" + instruction + "'");

    std::array<std::string, 5> out;
    for (int i = 0; i < 5; ++i) out[static_cast<size_t>(i)] = apply_rule(words, (*rules)[static_cast<size_t>(i)]);
    return out;
}

std::string sample_instruction(const std::string& instruction, Rng& rng, int n_variants) {
    if (n_variants < 0 || n_variants > 5)
        throw std::invalid_argument("sample_instruction: n_variants must be in 0..5");
    const uint64_t pick = rng.below(static_cast<uint64_t>(n_variants) + 1);
    if (pick == 0) return instruction;
    return paraphrases(instruction)[pick - 1];
}

std::string caption_for_types(const std::vector<sim::ObjectType>& types) {
    std::vector<sim::ObjectType> sorted = types;
    std::sort(sorted.begin(), sorted.end());
    std::string out = "a scene with";
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (i) out += " and";
        out += " a ";
        out += sim::type_name(sorted[i]);
    }
    return out;
}

}  // namespace grif::lang
