#include <doctest.h>

#include "abclim/transfer.hpp"

using namespace abclim;

namespace {

TransferConfig base_config() {
    TransferConfig c;
    c.param = named_param("NTP", 2);
    c.act = Activation{ActKind::tanh};
    c.widths = {64};
    c.seeds = {1, 2};
    c.T_pre = 5;
    c.t_fine = 3;
    Eigen::VectorXd x1(2), x2(2), x3(2);
    x1 << 1, 0.5;
    x2 << -0.5, 1;
    x3 << 0.3, -1;
    c.A.eta = 0.5;
    c.A.inputs = {x1, x2};
    c.A.targets = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
    c.B.eta = 0.5;
    c.B.inputs = {x3};
    c.B.targets = {Eigen::VectorXd::Constant(1, 0.7)};
    return c;
}

}  // namespace

TEST_CASE("no pretraining means no gap") {
    TransferConfig c = base_config();
    c.T_pre = 0;
    for (const auto& row : transfer_triviality(c)) CHECK(row.gap == 0.0);
}

TEST_CASE("pretraining leaves a finite-width gap") {
    const auto rows = transfer_triviality(base_config());
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) CHECK(row.gap > 0.0);
}

TEST_CASE("feature-learning parametrizations are rejected unless asked") {
    TransferConfig c = base_config();
    c.param = named_param("MUP", 2);
    CHECK_THROWS_AS(transfer_triviality(c), std::domain_error);
    c.allow_feature_learning = true;
    CHECK_NOTHROW(transfer_triviality(c));
}

TEST_CASE("NTP gap shrinks with width") {
    TransferConfig c = base_config();
    c.widths = {64, 2048};
    c.seeds = {1, 2, 3};
    const auto rows = transfer_triviality(c);
    double small = 0.0, large = 0.0;
    for (const auto& r : rows) (r.width == 64 ? small : large) += r.gap;
    CHECK(large < 0.5 * small);
}
