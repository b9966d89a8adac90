#include "lat/term.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace lat {

term term::pair(term left, term right) {
    term t;
    t.kind_ = term_kind::pair;
    t.args_.push_back(std::move(left));
    t.args_.push_back(std::move(right));
    return t;
}

term term::hash(term inner) {
    term t;
    t.kind_ = term_kind::hash;
    t.args_.push_back(std::move(inner));
    return t;
}

term term::sig(term payload, term key) {
    term t;
    t.kind_ = term_kind::sig;
    t.args_.push_back(std::move(payload));
    t.args_.push_back(std::move(key));
    return t;
}

bool term::operator==(const term& other) const {
    if (kind_ != other.kind_ || name_ != other.name_) return false;
    return args_ == other.args_;
}

term seq_of(const std::vector<term>& values) {
    term chain = term::rst();
    for (const term& v : values) chain = term::hash(term::pair(v, std::move(chain)));
    return chain;
}

std::optional<std::vector<term>> seq_view(const term& t) {
    std::vector<term> reversed;
    const term* cur = &t;
    while (cur->kind() != term_kind::rst) {
        if (cur->kind() != term_kind::hash) return std::nullopt;
        const term& inner = cur->args()[0];
        if (inner.kind() != term_kind::pair) return std::nullopt;
        reversed.push_back(inner.args()[0]);
        cur = &inner.args()[1];
    }
    std::reverse(reversed.begin(), reversed.end());
    return reversed;
}

bool chain_contains(const term& chain, const term& v) {
    return chain_position(chain, v).has_value();
}

std::optional<std::size_t> chain_position(const term& chain, const term& v) {
    auto view = seq_view(chain);
    if (!view) return std::nullopt;
    for (std::size_t i = 0; i < view->size(); ++i)
        if ((*view)[i] == v) return i;
    return std::nullopt;
}

namespace {

// Destructor saturation: everything the adversary can take apart.
void saturate(const std::vector<term>& base, std::unordered_set<std::string>& known) {
    std::vector<term> work(base.begin(), base.end());
    while (!work.empty()) {
        term t = std::move(work.back());
        work.pop_back();
        std::string k = to_string(t);
        if (!known.insert(std::move(k)).second) continue;
        if (t.kind() == term_kind::pair) {
            work.push_back(t.args()[0]);
            work.push_back(t.args()[1]);
        } else if (t.kind() == term_kind::sig) {
            work.push_back(t.args()[0]);
        }
    }
}

bool derive(const term& goal, const std::unordered_set<std::string>& known,
            std::unordered_map<std::string, bool>& memo) {
    switch (goal.kind()) {
        case term_kind::rst:
        case term_kind::pub_atom:
            return true;
        default:
            break;
    }
    std::string k = to_string(goal);
    auto it = memo.find(k);
    if (it != memo.end()) return it->second;
    if (known.count(k)) {
        memo[k] = true;
        return true;
    }
    bool ok = false;
    switch (goal.kind()) {
        case term_kind::nonce:
        case term_kind::key:
            ok = false;  // atoms beyond base knowledge cannot be invented
            break;
        case term_kind::pair:
            ok = derive(goal.args()[0], known, memo) && derive(goal.args()[1], known, memo);
            break;
        case term_kind::hash:
            ok = derive(goal.args()[0], known, memo);
            break;
        case term_kind::sig:
            ok = derive(goal.args()[0], known, memo) && derive(goal.args()[1], known, memo);
            break;
        default:
            break;
    }
    memo[k] = ok;
    return ok;
}

}  // namespace

bool derivable(const std::vector<term>& base, const term& goal) {
    std::unordered_set<std::string> known;
    saturate(base, known);
    std::unordered_map<std::string, bool> memo;
    return derive(goal, known, memo);
}

std::string to_string(const term& t) {
    switch (t.kind()) {
        case term_kind::rst:
            return "rst";
        case term_kind::pub_atom:
            return "pub:" + t.name();
        case term_kind::nonce:
            return "nonce:" + t.name();
        case term_kind::key:
            return "key:" + t.name();
        case term_kind::pair:
            return "(pair " + to_string(t.args()[0]) + " " + to_string(t.args()[1]) + ")";
        case term_kind::hash: {
            if (auto view = seq_view(t); view && !view->empty()) {
                std::string out = "(seq";
                for (const term& v : *view) out += " " + to_string(v);
                return out + ")";
            }
            return "(hash " + to_string(t.args()[0]) + ")";
        }
        case term_kind::sig:
            return "(sig " + to_string(t.args()[0]) + " " + to_string(t.args()[1]) + ")";
    }
    throw term_parse_error("unreachable term kind");
}

namespace {

std::string_view skip_ws(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
}

bool symbol_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')';
}

term atom_from_symbol(std::string_view sym) {
    auto rest_after = [&](std::string_view prefix) {
        return std::string(sym.substr(prefix.size()));
    };
    if (sym == "rst") return term::rst();
    if (sym.starts_with("pub:")) return term::pub(rest_after("pub:"));
    if (sym.starts_with("nonce:")) return term::nonce(rest_after("nonce:"));
    if (sym.starts_with("key:")) return term::key(rest_after("key:"));
    throw term_parse_error("unknown atom '" + std::string(sym) +
                           "' (expected rst, pub:<n>, nonce:<n> or key:<n>)");
}

std::pair<term, std::string_view> parse_one(std::string_view s);

std::pair<term, std::string_view> parse_compound(std::string_view s) {
    s = skip_ws(s.substr(1));  // past '('
    std::size_t n = 0;
    while (n < s.size() && symbol_char(s[n])) ++n;
    std::string_view op = s.substr(0, n);
    s = s.substr(n);
    std::vector<term> args;
    for (;;) {
        s = skip_ws(s);
        if (s.empty()) throw term_parse_error("unterminated term (missing ')')");
        if (s.front() == ')') {
            s.remove_prefix(1);
            break;
        }
        auto [arg, rest] = parse_one(s);
        args.push_back(std::move(arg));
        s = rest;
    }
    auto expect = [&](std::size_t want) {
        if (args.size() != want)
            throw term_parse_error("(" + std::string(op) + ") expects " + std::to_string(want) +
                                   " arguments, got " + std::to_string(args.size()));
    };
    if (op == "pair") {
        expect(2);
        return {term::pair(std::move(args[0]), std::move(args[1])), s};
    }
    if (op == "hash") {
        expect(1);
        return {term::hash(std::move(args[0])), s};
    }
    if (op == "sig") {
        expect(2);
        return {term::sig(std::move(args[0]), std::move(args[1])), s};
    }
    if (op == "seq") return {seq_of(args), s};
    throw term_parse_error("unknown constructor '(" + std::string(op) + " ...)'");
}

std::pair<term, std::string_view> parse_one(std::string_view s) {
    s = skip_ws(s);
    if (s.empty()) throw term_parse_error("empty term");
    if (s.front() == '(') return parse_compound(s);
    if (s.front() == ')') throw term_parse_error("unexpected ')'");
    std::size_t n = 0;
    while (n < s.size() && symbol_char(s[n])) ++n;
    return {atom_from_symbol(s.substr(0, n)), s.substr(n)};
}

}  // namespace

std::pair<term, std::string_view> parse_term_prefix(std::string_view text) {
    return parse_one(text);
}

term parse_term(std::string_view text) {
    auto [t, rest] = parse_one(text);
    rest = skip_ws(rest);
    if (!rest.empty())
        throw term_parse_error("trailing input after term: '" + std::string(rest) + "'");
    return t;
}

}  // namespace lat
