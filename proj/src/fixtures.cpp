#include "lcmid/fixtures.hpp"

#include "lcmid/error.hpp"

namespace lcmid {

namespace {

// Rows in original item order (item 1 first).
constexpr const char* kTimssK7[25] = {
    "1000000", "0100000", "1100000", "1100000", "1010000", "0000110", "0001110", "1000100", "0000100",
    "0001100", "1001000", "1000001", "1000001", "1100001", "1000000", "1000000", "1010000", "1010000",
    "1000001", "1010000", "1010000", "0000110", "1000000", "0000100", "1000001",
};

constexpr const char* kTimssK3[25] = {
    "100", "100", "100", "100", "100", "010", "010", "110", "010", "010", "110", "101", "101",
    "101", "100", "100", "100", "100", "101", "101", "100", "010", "100", "010", "101",
};

constexpr std::uint64_t kChecksumK7 = 9537864425656073952ull;
constexpr std::uint64_t kChecksumK3 = 9695189697566825708ull;

QMatrix from_rows(const char* const* rows, int n, int k, std::vector<std::string> labels) {
    MatrixXi m(n, k);
    for (int j = 0; j < n; ++j) {
        for (int a = 0; a < k; ++a) m(j, a) = rows[j][a] == '1' ? 1 : 0;
    }
    return QMatrix(std::move(m), std::move(labels));
}

} // namespace

std::uint64_t qmatrix_checksum(const QMatrix& q) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&](std::uint64_t byte) {
        h ^= byte & 0xffu;
        h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(q.n_items()));
    mix(static_cast<std::uint64_t>(q.n_attributes()));
    for (int j = 0; j < q.n_items(); ++j) {
        for (int k = 0; k < q.n_attributes(); ++k) mix(static_cast<std::uint64_t>(q(j, k)));
    }
    return h;
}

std::vector<std::string> fixture_names() { return {"timss_k3", "timss_k7"}; }

Fixture fixture(const std::string& name) {
    Fixture f;
    f.name = name;
    if (name == "timss_k7") {
        f.q = from_rows(kTimssK7, 25, 7, {"a1", "a2", "a3", "a4", "a5", "a6", "a7"});
        f.block1_items = {1, 3, 5, 10, 9, 6, 12};
        f.block2_items = {15, 4, 17, 11, 24, 22, 13};
        f.checksum = kChecksumK7;
    } else if (name == "timss_k3") {
        f.q = from_rows(kTimssK3, 25, 3, {"a1", "a2", "a3"});
        f.block1_items = {1, 6, 12};
        f.block2_items = {2, 7, 13};
        f.checksum = kChecksumK3;
    } else {
        throw InvalidInput("unknown fixture '" + name + "' (expected timss_k7 or timss_k3)");
    }
    return f;
}

} // namespace lcmid
