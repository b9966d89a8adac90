#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lat {

// Symbolic evidence terms. Free constructors only; hashing and signing are
// uninterpreted. Atoms split into public atoms (including the distinguished
// PCR reset state rst), nonces, and private keys.
enum class term_kind : std::uint8_t {
    rst,
    pub_atom,
    nonce,
    key,
    pair,
    hash,
    sig,
};

class term {
public:
    term() : kind_(term_kind::rst) {}

    static term rst() { return term(); }
    static term pub(std::string name) { return atom(term_kind::pub_atom, std::move(name)); }
    static term nonce(std::string name) { return atom(term_kind::nonce, std::move(name)); }
    static term key(std::string name) { return atom(term_kind::key, std::move(name)); }
    static term pair(term left, term right);
    static term hash(term inner);
    static term sig(term payload, term key);

    term_kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    const std::vector<term>& args() const { return args_; }

    bool is_atom() const {
        return kind_ == term_kind::rst || kind_ == term_kind::pub_atom ||
               kind_ == term_kind::nonce || kind_ == term_kind::key;
    }

    bool operator==(const term& other) const;
    bool operator!=(const term& other) const { return !(*this == other); }

private:
    static term atom(term_kind k, std::string name) {
        term t;
        t.kind_ = k;
        t.name_ = std::move(name);
        return t;
    }

    term_kind kind_;
    std::string name_;
    std::vector<term> args_;
};

// A hash chain #(vn, #(..., #(v1, rst))) viewed as its extension sequence.
struct seq_view_result {
    std::vector<term> values;
};

// Right-nested hash chain anchored at rst; seq_of({}) is rst itself.
term seq_of(const std::vector<term>& values);

// Inverse of seq_of when t is a well-formed chain, absent otherwise.
std::optional<std::vector<term>> seq_view(const term& t);

// True iff the chain contains v (one containment level, per chain position).
bool chain_contains(const term& chain, const term& v);

// Position of v in the chain view, if contained. Earlier = extended earlier.
std::optional<std::size_t> chain_position(const term& chain, const term& v);

// Adversary derivability. goal is derivable from base iff it lies in the
// least set containing base, all public atoms and rst, closed under
// construction (pair/hash/sig, sig needing a derivable key) and destruction
// (pair projection, signature payload extraction). Hashing is one-way;
// nonces and keys are derivable only when exposed by base.
bool derivable(const std::vector<term>& base, const term& goal);

struct term_parse_error : std::runtime_error {
    explicit term_parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Canonical textual form: atoms as pub:<n> / nonce:<n> / key:<n> / rst,
// compounds as (pair x y), (hash x), (sig m k). Recognized chains are
// printed with the (seq v1 ... vn) sugar, which the parser also accepts.
std::string to_string(const term& t);
term parse_term(std::string_view text);

// Parses one term from the front of text, returning the unconsumed suffix.
std::pair<term, std::string_view> parse_term_prefix(std::string_view text);

}  // namespace lat
