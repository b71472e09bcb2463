#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support.hpp"

using namespace hts;
using hts::testing::small_tree;

TEST(Hierarchy, SmallTreeShape) {
    const auto h = small_tree();
    EXPECT_EQ(h.size(), 7u);
    EXPECT_EQ(h.bottom_count(), 4u);
    const std::vector<std::string> ids{"A", "B", "C", "D", "E", "F", "G"};
    EXPECT_EQ(h.ids(), ids);
    const std::vector<std::size_t> levels{0, 1, 1, 2, 2, 2, 2};
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(h.level(i), levels[i]);
    EXPECT_EQ(h.level_sizes(), (std::vector<std::size_t>{1, 2, 4}));
    EXPECT_EQ(h.bottom_indices(), (std::vector<std::size_t>{3, 4, 5, 6}));
    EXPECT_TRUE(h.warnings().empty());
}

TEST(Hierarchy, OrderingIsLevelMajorAndStable) {
    // Children listed before their parent's own edge.
    const auto h = Hierarchy::build({{"B", "D"}, {"A", "C"}, {"A", "B"}, {"C", "E"}});
    EXPECT_EQ(h.ids(), (std::vector<std::string>{"A", "B", "C", "D", "E"}));
    const auto [first, last] = h.level_range(2);
    EXPECT_EQ(first, 3u);
    EXPECT_EQ(last, 5u);
}

TEST(Hierarchy, SingleChildChainWarns) {
    const auto h = Hierarchy::build({{"A", "B"}});
    EXPECT_EQ(h.size(), 2u);
    EXPECT_EQ(h.bottom_count(), 1u);
    ASSERT_EQ(h.warnings().size(), 1u);
    EXPECT_NE(h.warnings().front().find("A"), std::string::npos);
}

TEST(Hierarchy, Errors) {
    EXPECT_THROW(Hierarchy::build({{"A", "B"}, {"B", "A"}}), InputError);
    EXPECT_THROW(Hierarchy::build({{"A", "A"}}), InputError);
    EXPECT_THROW(Hierarchy::build({}), InputError);
    EXPECT_THROW(Hierarchy::build({{"A", "B"}, {"A", "B"}}), InputError);
    EXPECT_THROW(Hierarchy::build({{"A", "C"}, {"B", "C"}}), InputError);
    EXPECT_THROW(Hierarchy::build({{"A", "B"}, {"C", "D"}}), InputError);
    EXPECT_THROW(Hierarchy::build({{"", "B"}}), InputError);
    // Root plus a detached cycle.
    EXPECT_THROW(Hierarchy::build({{"R", "X"}, {"B", "C"}, {"C", "B"}}), InputError);
}

TEST(Hierarchy, CycleMessageNamesCycle) {
    try {
        Hierarchy::build({{"A", "B"}, {"B", "A"}});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
    }
}

TEST(Hierarchy, EdgesRoundTrip) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
        const auto h = hts::testing::random_hierarchy(rng);
        const auto again = Hierarchy::build(h.edges());
        EXPECT_EQ(again.ids(), h.ids());
    }
}

TEST(Hierarchy, ReadFileWithComments) {
    const auto dir = hts::testing::scratch_dir("hier");
    const auto path = dir / "h.csv";
    {
        std::ofstream out(path);
        out << "# tree\nA,B\n\nA,C\n B , D \n";
    }
    const auto h = read_hierarchy(path);
    EXPECT_EQ(h.ids(), (std::vector<std::string>{"A", "B", "C", "D"}));
    EXPECT_THROW(read_hierarchy(dir / "missing.csv"), InputError);
    std::filesystem::remove_all(dir);
}

TEST(SummingMatrix, SmallTreeMatchesDisplayedMatrix) {
    const auto s = summing_matrix(small_tree()).dense();
    Eigen::MatrixXd expected(7, 4);
    expected << 1, 1, 1, 1,  //
        1, 1, 0, 0,          //
        0, 0, 1, 1,          //
        1, 0, 0, 0,          //
        0, 1, 0, 0,          //
        0, 0, 1, 0,          //
        0, 0, 0, 1;
    EXPECT_EQ(s, expected);
}

TEST(SummingMatrix, SingletonAndChain) {
    const auto one = summing_matrix(Hierarchy::singleton("A")).dense();
    EXPECT_EQ(one, Eigen::MatrixXd::Ones(1, 1));
    const auto chain = summing_matrix(Hierarchy::build({{"A", "B"}, {"B", "C"}})).dense();
    EXPECT_EQ(chain, Eigen::MatrixXd::Ones(3, 1));
}

TEST(SummingMatrix, ColumnSumsEqualPathLength) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 50; ++k) {
        const auto h = hts::testing::random_hierarchy(rng);
        const auto s = summing_matrix(h).dense();
        for (std::size_t j = 0; j < h.bottom_count(); ++j) {
            const auto leaf = h.bottom_indices()[j];
            EXPECT_EQ(s.col(static_cast<Eigen::Index>(j)).sum(), static_cast<double>(h.level(leaf) + 1));
            EXPECT_EQ(s(static_cast<Eigen::Index>(leaf), static_cast<Eigen::Index>(j)), 1.0);
        }
        EXPECT_EQ(summing_matrix(h).dense(), s);
    }
}

TEST(SummingMatrix, ApplyMatchesDenseProduct) {
    std::mt19937_64 rng(5);
    const auto h = hts::testing::random_hierarchy(rng);
    const SummingMatrix s(h);
    const auto b = hts::testing::uniform_vector(rng, s.cols(), -3, 3);
    EXPECT_LT((s.apply(b) - s.dense() * b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(s.apply(Eigen::VectorXd::Zero(s.cols() + 1)), ContractError);
}

TEST(Ancestors, Examples) {
    const auto h = small_tree();
    EXPECT_EQ(ancestors(h, h.index_of("D")), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(ancestors(h, h.index_of("C")), (std::vector<std::size_t>{0}));
    EXPECT_TRUE(ancestors(h, 0).empty());
    EXPECT_THROW(ancestors(h, 7), ContractError);
}

TEST(Ancestors, LengthEqualsLevel) {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 30; ++k) {
        const auto h = hts::testing::random_hierarchy(rng);
        for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(ancestors(h, i).size(), h.level(i));
    }
}

TEST(IsCoherent, Examples) {
    const auto h = small_tree();
    Eigen::VectorXd y(7);
    y << 10, 3, 7, 1, 2, 3, 4;
    EXPECT_TRUE(is_coherent(h, y, 0.0));
    y(0) = 9;
    EXPECT_FALSE(is_coherent(h, y, 1e-9));
    y(0) = 10 + 5e-10 * 10;
    EXPECT_TRUE(is_coherent(h, y, 1e-9));
    EXPECT_THROW(is_coherent(h, Eigen::VectorXd::Zero(6), 0.0), ContractError);
}

TEST(IsCoherent, SummingOutputIsExactlyCoherent) {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 200; ++k) {
        const auto h = hts::testing::random_hierarchy(rng);
        const SummingMatrix s(h);
        const auto b = hts::testing::uniform_vector(rng, s.cols(), -1e6, 1e6);
        EXPECT_TRUE(is_coherent(h, s.apply(b), 0.0));
    }
}
