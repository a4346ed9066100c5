#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cefr {

inline constexpr int kNumLevels = 6;

// Ordinal CEFR level, A1 = 0 ... C2 = 5.
class Level {
public:
    constexpr Level() = default;
    constexpr explicit Level(int index) : index_(index) {}

    // Throws std::invalid_argument for indices outside [0, 5].
    static Level from_index(int index);
    // Accepts "A1".."C2" (case-insensitive). Throws std::invalid_argument otherwise.
    static Level from_label(std::string_view label);
    static std::optional<Level> try_from_label(std::string_view label);

    constexpr int index() const { return index_; }
    std::string_view label() const;

    constexpr auto operator<=>(const Level&) const = default;

private:
    int index_ = 0;
};

inline constexpr std::array<std::string_view, kNumLevels> kLevelLabels = {"A1", "A2", "B1",
                                                                          "B2", "C1", "C2"};

// Set of gold levels for one sentence. Backed by a bitmask over level indices.
class LevelSet {
public:
    LevelSet() = default;
    LevelSet(std::initializer_list<Level> levels);

    static LevelSet single(Level level);

    void insert(Level level);
    bool contains(Level level) const;
    bool empty() const { return bits_ == 0; }
    int size() const;

    Level lowest() const;
    Level highest() const;
    // Ascending order.
    std::vector<Level> levels() const;

    std::uint8_t bits() const { return bits_; }
    bool operator==(const LevelSet&) const = default;

private:
    std::uint8_t bits_ = 0;
};

// Returns the 1-2 element set for two annotator judgements, or nullopt when they
// differ by more than one grade and the sentence must be excluded.
std::optional<LevelSet> reconcile_annotations(Level a, Level b);

// Index of the maximal element; exact ties resolve to the lowest index.
template <typename Range>
int argmax_lowest(const Range& values) {
    int best = 0;
    int i = 0;
    for (const auto& v : values) {
        if (v > values[best]) best = i;
        ++i;
    }
    return best;
}

}  // namespace cefr
