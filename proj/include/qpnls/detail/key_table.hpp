#pragma once

// Open-addressing hash table keyed by SiteKey. Linear probing, power-of-two
// capacity, no deletion.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "qpnls/lattice.hpp"

namespace qpnls::detail {

inline std::uint64_t mix_key(SiteKey k) {
    auto lo = static_cast<std::uint64_t>(static_cast<unsigned __int128>(k));
    auto hi = static_cast<std::uint64_t>(static_cast<unsigned __int128>(k) >> 64);
    std::uint64_t z = lo ^ (hi * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

template <class V>
class KeyTable {
public:
    explicit KeyTable(std::size_t expected = 16) { rehash(capacity_for(expected)); }

    V& operator[](SiteKey k) {
        if (2 * (count_ + 1) > keys_.size()) rehash(keys_.size() * 2);
        std::size_t i = mix_key(k) & mask_;
        while (used_[i]) {
            if (keys_[i] == k) return vals_[i];
            i = (i + 1) & mask_;
        }
        used_[i] = 1;
        keys_[i] = k;
        vals_[i] = V{};
        ++count_;
        return vals_[i];
    }

    const V* find(SiteKey k) const {
        std::size_t i = mix_key(k) & mask_;
        while (used_[i]) {
            if (keys_[i] == k) return &vals_[i];
            i = (i + 1) & mask_;
        }
        return nullptr;
    }

    std::size_t size() const { return count_; }

    template <class Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i = 0; i < keys_.size(); ++i)
            if (used_[i]) fn(keys_[i], vals_[i]);
    }

private:
    static std::size_t capacity_for(std::size_t n) {
        std::size_t c = 16;
        while (c < 2 * n) c <<= 1;
        return c;
    }

    void rehash(std::size_t cap) {
        std::vector<SiteKey> keys(cap);
        std::vector<V> vals(cap);
        std::vector<std::uint8_t> used(cap, 0);
        const std::size_t mask = cap - 1;
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (!used_[i]) continue;
            std::size_t j = mix_key(keys_[i]) & mask;
            while (used[j]) j = (j + 1) & mask;
            used[j] = 1;
            keys[j] = keys_[i];
            vals[j] = std::move(vals_[i]);
        }
        keys_.swap(keys);
        vals_.swap(vals);
        used_.swap(used);
        mask_ = mask;
    }

    std::vector<SiteKey> keys_;
    std::vector<V> vals_;
    std::vector<std::uint8_t> used_;
    std::size_t mask_ = 0;
    std::size_t count_ = 0;
};

}  // namespace qpnls::detail
