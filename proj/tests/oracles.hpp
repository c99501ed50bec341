#pragma once

// Test-only reference implementations. These deliberately share no code with
// the library paths they check.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

/// Full (n+1)x(m+1) DP table, no prefix/suffix trimming.
inline std::size_t edit_distance_table(const Seq& a, const Seq& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    return d[a.size()][b.size()];
}

/// Breadth-first search over edit scripts: from `from`, the minimum number
/// of single-token insertions, deletions and substitutions (over `alphabet`)
/// to reach every sequence of length <= max_len.
inline std::map<Seq, std::size_t> edit_script_bfs(const Seq& from, const Seq& alphabet, std::size_t max_len) {
    std::map<Seq, std::size_t> dist{{from, 0}};
    std::queue<Seq> q;
    q.push(from);
    while (!q.empty()) {
        Seq s = q.front();
        q.pop();
        const std::size_t d = dist[s];
        auto visit = [&](Seq t) {
            if (dist.emplace(t, d + 1).second) q.push(std::move(t));
        };
        for (std::size_t i = 0; i < s.size(); ++i) {
            Seq t = s;
            t.erase(t.begin() + static_cast<std::ptrdiff_t>(i));
            visit(std::move(t));
            for (const auto& x : alphabet) {
                if (x == s[i]) continue;
                Seq u = s;
                u[i] = x;
                visit(std::move(u));
            }
        }
        if (s.size() < max_len)
            for (std::size_t i = 0; i <= s.size(); ++i)
                for (const auto& x : alphabet) {
                    Seq t = s;
                    t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), x);
                    visit(std::move(t));
                }
    }
    return dist;
}

/// Edit distance between every pair of sequences of length <= max_len, by
/// BFS over the single-edit graph. Returns the node list and a dense
/// distance matrix indexed like it.
struct AllPairs {
    std::vector<Seq> nodes;
    std::vector<std::vector<std::size_t>> dist;
};

inline std::vector<Seq> all_sequences(const Seq& alphabet, std::size_t max_len);

inline AllPairs edit_distance_all_pairs_bfs(const Seq& alphabet, std::size_t max_len) {
    AllPairs out;
    out.nodes = all_sequences(alphabet, max_len);
    std::map<Seq, std::size_t> id;
    for (std::size_t i = 0; i < out.nodes.size(); ++i) id[out.nodes[i]] = i;
    std::vector<std::vector<std::size_t>> adj(out.nodes.size());
    for (std::size_t i = 0; i < out.nodes.size(); ++i) {
        const Seq& s = out.nodes[i];
        auto link = [&](const Seq& t) {
            if (auto it = id.find(t); it != id.end()) adj[i].push_back(it->second);
        };
        for (std::size_t p = 0; p < s.size(); ++p) {
            Seq t = s;
            t.erase(t.begin() + static_cast<std::ptrdiff_t>(p));
            link(t);
            for (const auto& x : alphabet) {
                if (x == s[p]) continue;
                Seq u = s;
                u[p] = x;
                link(u);
            }
        }
        for (std::size_t p = 0; p <= s.size(); ++p)
            for (const auto& x : alphabet) {
                Seq t = s;
                t.insert(t.begin() + static_cast<std::ptrdiff_t>(p), x);
                link(t);
            }
    }
    const std::size_t unseen = static_cast<std::size_t>(-1);
    out.dist.assign(out.nodes.size(), std::vector<std::size_t>(out.nodes.size(), unseen));
    for (std::size_t src = 0; src < out.nodes.size(); ++src) {
        auto& d = out.dist[src];
        std::queue<std::size_t> q;
        d[src] = 0;
        q.push(src);
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (auto v : adj[u])
                if (d[v] == unseen) {
                    d[v] = d[u] + 1;
                    q.push(v);
                }
        }
    }
    return out;
}

/// All sequences of length 0..max_len over the alphabet.
inline std::vector<Seq> all_sequences(const Seq& alphabet, std::size_t max_len) {
    std::vector<Seq> out{{}};
    std::vector<Seq> frontier{{}};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<Seq> next;
        for (const auto& s : frontier)
            for (const auto& x : alphabet) {
                Seq t = s;
                t.push_back(x);
                next.push_back(t);
            }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

/// GLEU by listing every n-gram and removing matched copies one at a time.
inline double gleu_bruteforce(const Seq& hyp, const Seq& ref, std::size_t max_n = 4) {
    std::size_t matches = 0, hyp_total = 0, ref_total = 0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        std::vector<Seq> hg, rg;
        for (std::size_t i = 0; i + n <= hyp.size(); ++i) hg.emplace_back(hyp.begin() + i, hyp.begin() + i + n);
        for (std::size_t i = 0; i + n <= ref.size(); ++i) rg.emplace_back(ref.begin() + i, ref.begin() + i + n);
        hyp_total += hg.size();
        ref_total += rg.size();
        for (const auto& g : hg) {
            auto it = std::find(rg.begin(), rg.end(), g);
            if (it != rg.end()) {
                ++matches;
                rg.erase(it);
            }
        }
    }
    if (hyp_total == 0) return 0.0;
    return std::min(static_cast<double>(matches) / hyp_total, static_cast<double>(matches) / ref_total);
}

inline Seq random_seq(std::mt19937_64& rng, const Seq& alphabet, std::size_t max_len, std::size_t min_len = 0) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    Seq s(len(rng));
    for (auto& t : s) t = alphabet[pick(rng)];
    return s;
}

/// Cosine of two vectors, normalizing both here.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// From-scratch trigger model: the DP table on every step, one request in
/// flight, a crossing during flight re-checked when the response lands.
struct ReferenceCoordinator {
    std::size_t tau = 0;
    Seq text, snapshot;
    std::uint64_t issued = 0, applied = 0;
    bool in_flight = false;

    std::optional<std::uint64_t> try_issue() {
        if (in_flight || text.empty() || edit_distance_table(text, snapshot) <= tau) return std::nullopt;
        snapshot = text;
        in_flight = true;
        return ++issued;
    }
    std::optional<std::uint64_t> observe(Seq t) {
        text = std::move(t);
        return try_issue();
    }
    std::optional<std::uint64_t> respond(std::uint64_t seq) {
        if (seq <= applied) return std::nullopt;
        applied = seq;
        if (seq != issued) return std::nullopt;
        in_flight = false;
        return try_issue();
    }
    std::optional<std::uint64_t> fail(std::uint64_t seq) {
        if (seq != issued || !in_flight) return std::nullopt;
        in_flight = false;
        return try_issue();
    }
};

} // namespace oracle
