#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcmid/model.hpp"

namespace lcmid {

/// Bundled Q-matrices of the TIMSS 2007 fourth-grade mathematics items,
/// rows in the original item order 1..25.
struct Fixture {
    std::string name;
    QMatrix q;
    /// 1-based item numbers of the two K x K unit-diagonal blocks of the
    /// reference grouping, in attribute order.
    std::vector<int> block1_items;
    std::vector<int> block2_items;
    std::uint64_t checksum = 0;
};

std::vector<std::string> fixture_names();
/// Throws InvalidInput on an unknown name.
Fixture fixture(const std::string& name);

/// FNV-1a over the dimensions and row-major entries.
std::uint64_t qmatrix_checksum(const QMatrix& q);

} // namespace lcmid
