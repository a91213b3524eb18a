#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "mosaic/metrics.hpp"
#include "mosaic/rng.hpp"

using namespace mosaic;

TEST(Report, WorkedExamples) {
    const std::vector<double> s{0.9, 0.4, 0.6};
    const EvalReport r = compute_report(s);
    EXPECT_NEAR(r.s_avg, 1.9 / 3.0, 1e-15);
    EXPECT_NEAR(r.p_05, 2.0 / 3.0, 1e-15);
    EXPECT_EQ(r.threshold, 0.5);
    EXPECT_EQ(r.scores, s);

    const std::vector<double> clean(16, 0.89);
    const EvalReport c = compute_report(clean);
    EXPECT_NEAR(c.s_avg, 0.89, 1e-15);
    EXPECT_EQ(c.p_05, 1.0);

    const std::vector<double> edge{0.5};
    EXPECT_EQ(compute_report(edge).p_05, 1.0);
}

TEST(Report, ThresholdExtremes) {
    const std::vector<double> s{0.1, 0.35, 0.2};
    EXPECT_EQ(compute_report(s, 0.0).p_05, 1.0);
    EXPECT_EQ(compute_report(s, std::nextafter(0.35, 1.0)).p_05, 0.0);
}

TEST(Report, RejectsBadInput) {
    EXPECT_THROW((void)compute_report(std::vector<double>{}), MetricsError);
    EXPECT_THROW((void)compute_report(std::vector<double>{0.2, 1.01}), MetricsError);
    EXPECT_THROW((void)compute_report(std::vector<double>{-0.1}), MetricsError);
    EXPECT_THROW((void)compute_report(std::vector<double>{0.2}, 1.5), MetricsError);
}

TEST(Report, PermutationInvarianceAndMonotonicity) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(1 + rng.next_u64() % 40);
        for (auto& v : s) v = std::round(rng.uniform01() * 20) / 20;  // hits the threshold often
        const EvalReport base = compute_report(s);

        auto shuffled = s;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.next_u64() % i]);
        const EvalReport perm = compute_report(shuffled);
        EXPECT_NEAR(perm.s_avg, base.s_avg, 1e-12);
        EXPECT_EQ(perm.p_05, base.p_05);

        auto raised = s;
        const std::size_t k = rng.next_u64() % raised.size();
        raised[k] = std::min(1.0, raised[k] + rng.uniform01() * 0.5);
        const EvalReport up = compute_report(raised);
        EXPECT_GE(up.s_avg, base.s_avg - 1e-12);
        EXPECT_GE(up.p_05, base.p_05);
        EXPECT_GE(up.s_avg, 0.0);
        EXPECT_LE(up.s_avg, 1.0);
    }
}

TEST(Grids, ShapesAndOrdering) {
    const auto train = training_grid();
    const auto test = testing_grid();
    ASSERT_EQ(train.size(), 16u);
    ASSERT_EQ(test.size(), 96u);

    std::set<double> train_d, test_d, train_a, test_a;
    for (const auto& t : train) train_d.insert(t.distance_m()), train_a.insert(t.azimuth_deg());
    for (const auto& t : test) test_d.insert(t.distance_m()), test_a.insert(t.azimuth_deg());
    EXPECT_EQ(train_d, (std::set<double>{5, 8}));
    EXPECT_EQ(test_d, (std::set<double>{5, 8, 12, 15}));
    EXPECT_EQ(train_a.size(), 8u);
    EXPECT_EQ(test_a.size(), 24u);
    EXPECT_EQ(*train_a.rbegin(), 315.0);
    EXPECT_EQ(*test_a.rbegin(), 345.0);
    // Distance-major.
    EXPECT_EQ(train[0], CameraTransform(5, 0));
    EXPECT_EQ(train[1], CameraTransform(5, 45));
    EXPECT_EQ(train[8], CameraTransform(8, 0));
    EXPECT_EQ(test[24], CameraTransform(8, 0));

    EXPECT_EQ(transform_grid(TransformSet::training), train);
    EXPECT_EQ(transform_grid(parse_transform_set("testing")), test);
    EXPECT_EQ(to_string(TransformSet::testing), "testing");
    EXPECT_THROW((void)parse_transform_set("validation"), std::invalid_argument);
}

TEST(CameraTransform, WrapsAzimuthAndRejectsDistance) {
    EXPECT_EQ(CameraTransform(5, 360).azimuth_deg(), 0.0);
    EXPECT_EQ(CameraTransform(5, -15).azimuth_deg(), 345.0);
    EXPECT_EQ(CameraTransform(5, 725).azimuth_deg(), 5.0);
    EXPECT_THROW(CameraTransform(0, 10), MetricsError);
    EXPECT_THROW(CameraTransform(-3, 10), MetricsError);
}

TEST(ReferenceTables, PublishedRows) {
    auto er = reference_er_table();
    ASSERT_EQ(er.size(), 9u);
    auto find = [](std::span<const ReferenceRow> rows, const std::string& method,
                   const std::string& setting) -> const ReferenceRow* {
        for (const auto& r : rows)
            if (r.method == method && r.setting == setting) return &r;
        return nullptr;
    };
    const ReferenceRow* clean = find(er, "clean", "-");
    ASSERT_NE(clean, nullptr);
    EXPECT_EQ(clean->s_avg, 0.89);
    EXPECT_EQ(clean->p_05, 0.91);
    const ReferenceRow* best = find(er, "search", "E5-R2");
    ASSERT_NE(best, nullptr);
    EXPECT_EQ(best->s_avg, 0.43);
    EXPECT_EQ(best->p_05, 0.39);
    const ReferenceRow* rand = find(er, "random", "E7-R0");
    ASSERT_NE(rand, nullptr);
    EXPECT_EQ(rand->s_avg, 0.73);

    auto render = reference_render_table();
    ASSERT_EQ(render.size(), 4u);
    EXPECT_EQ(render[1].s_avg, 0.85);
    EXPECT_EQ(render[1].p_05, 0.88);
}

TEST(ReportDocument, EmbedsEverything) {
    const auto grid = training_grid();
    std::vector<double> s(grid.size(), 0.25);
    s[3] = 0.75;
    const auto doc = report_document(compute_report(s), grid, "E5-R2");
    EXPECT_EQ(doc["er_label"], "E5-R2");
    EXPECT_EQ(doc["transform_count"], 16);
    EXPECT_DOUBLE_EQ(doc["s_avg"].get<double>(), (15 * 0.25 + 0.75) / 16);
    EXPECT_DOUBLE_EQ(doc["p_05"].get<double>(), 1.0 / 16);
    ASSERT_EQ(doc["per_transform"].size(), 16u);
    EXPECT_EQ(doc["per_transform"][3]["score"], 0.75);
    EXPECT_EQ(doc["per_transform"][3]["azimuth_deg"], 135.0);
    EXPECT_TRUE(doc["reference"].is_object());
    EXPECT_FALSE(doc["reference"].empty());
}
