#include "cefr/level.hpp"

#include <bit>
#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace cefr {

Level Level::from_index(int index) {
    if (index < 0 || index >= kNumLevels) {
        throw std::invalid_argument("level index out of range: " + std::to_string(index));
    }
    return Level(index);
}

std::optional<Level> Level::try_from_label(std::string_view label) {
    if (label.size() != 2) return std::nullopt;
    const char band = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    const char step = label[1];
    int base = 0;
    switch (band) {
        case 'A': base = 0; break;
        case 'B': base = 2; break;
        case 'C': base = 4; break;
        default: return std::nullopt;
    }
    if (step != '1' && step != '2') return std::nullopt;
    return Level(base + (step - '1'));
}

Level Level::from_label(std::string_view label) {
    auto level = try_from_label(label);
    if (!level) throw std::invalid_argument("unknown CEFR label: '" + std::string(label) + "'");
    return *level;
}

std::string_view Level::label() const {
    return kLevelLabels.at(static_cast<std::size_t>(index_));
}

LevelSet::LevelSet(std::initializer_list<Level> levels) {
    for (Level l : levels) insert(l);
}

LevelSet LevelSet::single(Level level) {
    LevelSet s;
    s.insert(level);
    return s;
}

void LevelSet::insert(Level level) {
    if (level.index() < 0 || level.index() >= 8) {
        throw std::invalid_argument("level index out of range for LevelSet");
    }
    bits_ = static_cast<std::uint8_t>(bits_ | (1u << level.index()));
}

bool LevelSet::contains(Level level) const {
    if (level.index() < 0 || level.index() >= 8) return false;
    return (bits_ >> level.index()) & 1u;
}

int LevelSet::size() const { return std::popcount(bits_); }

Level LevelSet::lowest() const {
    if (empty()) throw std::logic_error("lowest() on empty LevelSet");
    return Level(std::countr_zero(bits_));
}

Level LevelSet::highest() const {
    if (empty()) throw std::logic_error("highest() on empty LevelSet");
    return Level(7 - std::countl_zero(bits_));
}

std::vector<Level> LevelSet::levels() const {
    std::vector<Level> out;
    for (int i = 0; i < 8; ++i) {
        if ((bits_ >> i) & 1u) out.emplace_back(i);
    }
    return out;
}

std::optional<LevelSet> reconcile_annotations(Level a, Level b) {
    const int gap = std::abs(a.index() - b.index());
    if (gap > 1) return std::nullopt;
    return LevelSet{a, b};
}

}  // namespace cefr
