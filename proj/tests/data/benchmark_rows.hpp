#pragma once

// Published lane-topology benchmark leaderboard rows (percent scale), used
// to validate the combined-score arithmetic. Rows 4-9 and 10-15 come in
// baseline / improved pairs on the two evaluation subsets; rows 1-3 are
// standalone baselines on the first subset.

namespace lanetopo_tests {

struct ScoreRow {
    const char* label;
    double top_ll, top_lt, det_l, det_t, ols;  // percent scale as printed
    bool paired;  // member of a baseline/improved pair
};

inline constexpr ScoreRow kScoreRows[] = {
    {"a_row01", 2.9, 19.8, 12.7, 43.0, 29.3, false},
    {"a_row02", 2.7, 9.2, 11.1, 41.7, 24.9, false},
    {"a_row03", 5.9, 15.1, 17.7, 43.5, 31.0, false},
    {"a_row04", 10.9, 23.8, 28.6, 48.6, 39.8, true},
    {"a_row05", 29.5, 32.6, 29.6, 49.0, 47.5, true},
    {"a_row06", 21.7, 26.9, 28.5, 49.5, 44.1, true},
    {"a_row07", 24.0, 30.0, 28.6, 51.6, 46.0, true},
    {"a_row08", 23.9, 25.4, 29.9, 47.2, 44.1, true},
    {"a_row09", 32.2, 33.9, 31.8, 49.4, 49.0, true},
    {"b_row10", 6.7, 16.7, 24.4, 52.6, 36.0, true},
    {"b_row11", 33.3, 25.8, 29.7, 55.1, 48.3, true},
    {"b_row12", 20.8, 20.3, 21.6, 59.1, 42.9, true},
    {"b_row13", 27.5, 25.2, 25.0, 60.5, 47.0, true},
    {"b_row14", 21.6, 17.9, 25.9, 54.7, 42.3, true},
    {"b_row15", 37.3, 27.4, 33.1, 54.7, 50.3, true},
};
inline constexpr int kScoreRowCount = 15;

}  // namespace lanetopo_tests
