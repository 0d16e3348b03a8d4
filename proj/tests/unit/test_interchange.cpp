#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>

#include "timefuse/interchange.hpp"
#include "timefuse/parallel.hpp"

using namespace timefuse;
namespace fs = std::filesystem;

namespace {

std::string message_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::IoError;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "timefuse_interchange_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("long CSV parses into per-sample blocks", "[interchange]") {
    const auto t = parse_long_csv(
        "sample_id,t,var_0,var_1\n"
        "w0,0,1,10\nw0,1,2,20\nw0,2,3,30\n"
        "w1,0,-1,1e3\r\nw1,1,-2,2.5\nw1,2,-3, 7\n");
    CHECK(t.ids == std::vector<std::string>{"w0", "w1"});
    CHECK(t.length == 3);
    CHECK(t.d == 2);
    CHECK(t.values[0] == std::vector<double>{1, 10, 2, 20, 3, 30});
    CHECK(t.values[1] == std::vector<double>{-1, 1000, -2, 2.5, -3, 7});
    CHECK(parse_long_csv(long_csv(t.ids, t.length, t.d, t.values)).values == t.values);
}

TEST_CASE("long CSV errors name the line", "[interchange]") {
    const std::string head = "sample_id,t,var_0\n";
    CHECK(message_of([&] { (void)parse_long_csv(head + "a,0,1\na,1,x\n", "w.csv"); }).find("w.csv: line 3") !=
          std::string::npos);
    CHECK(message_of([&] { (void)parse_long_csv(head + "a,0,1,2\n"); }).find("line 2") != std::string::npos);
    CHECK(message_of([&] { (void)parse_long_csv(head + "a,1,1\n"); }).find("expected t=0") != std::string::npos);
    CHECK(message_of([&] { (void)parse_long_csv(head + "a,0,1\nb,0,1\nb,1,1\n"); }).find("has 2 steps") !=
          std::string::npos);
    CHECK(message_of([&] { (void)parse_long_csv(head + "a,0,1\nb,0,1\na,0,1\n"); }).find("not contiguous") !=
          std::string::npos);
    CHECK(kind_of([&] { (void)parse_long_csv("id,t,var_0\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([&] { (void)parse_long_csv("sample_id,t,var_1\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([&] { (void)parse_long_csv(head); }) == ErrorKind::ParseError);
    CHECK(kind_of([&] { (void)parse_long_csv(head + "a,0,nan\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([&] { (void)parse_long_csv(head + "a,-1,1\n"); }) == ErrorKind::ParseError);
}

TEST_CASE("windows are validated per sample", "[interchange]") {
    std::string csv = "sample_id,t,var_0\n";
    for (int t = 0; t < 4; ++t) csv += "short," + std::to_string(t) + ",1\n";
    const auto msg = message_of([&] { (void)to_windows(parse_long_csv(csv)); });
    CHECK(msg.find("WindowTooShort") != std::string::npos);
    CHECK(msg.find("'short'") != std::string::npos);
}

TEST_CASE("prediction files round-trip", "[interchange]") {
    const auto dir = fresh_dir("pred");
    PredictionFile f{"patchtst", 2, 3, 2, {}};
    for (int i = 0; i < 12; ++i) f.values.push_back(0.25f * static_cast<float>(i) - 1.0f);
    write_prediction_file(dir, f);
    write_prediction_file(dir, PredictionFile{"dlinear", 2, 3, 2, std::vector<float>(12, 1.0f)});
    const auto back = read_prediction_file(dir, "patchtst");
    CHECK(back.values == f.values);
    CHECK(back.n_samples == 2);
    CHECK(discover_roster(dir) == std::vector<std::string>{"dlinear", "patchtst"});

    const auto missing = message_of([&] { (void)read_prediction_file(dir, "timesnet"); });
    CHECK(missing.find("model 'timesnet'") != std::string::npos);

    fs::resize_file(prediction_payload_path(dir, "dlinear"), 20);
    CHECK(kind_of([&] { (void)read_prediction_file(dir, "dlinear"); }) == ErrorKind::TruncatedFile);
    CHECK(kind_of([&] { write_prediction_file(dir, PredictionFile{"bad", 2, 3, 2, {1.0f}}); }) ==
          ErrorKind::ShapeMismatch);
}

TEST_CASE("feature and weight tables", "[interchange]") {
    const std::vector<std::string> ids{"a"};
    MetaFeatureVector v;
    v[0] = 0.1;
    const std::vector<MetaFeatureVector> rows{v};
    const auto csv = features_csv(ids, rows);
    CHECK(csv.rfind("sample_id,mean,std,", 0) == 0);
    CHECK(csv.find("\na,0.10000000000000001,0,") != std::string::npos);

    const std::vector<std::string> roster{"x", "y"};
    const std::vector<std::vector<double>> w{{0.25, 0.75}};
    CHECK(weights_csv(roster, ids, w) == "sample_id,x,y\na,0.25,0.75\n");
}

TEST_CASE("parallel_for covers every index and rethrows", "[parallel]") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += static_cast<int>(i); });
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i));

    std::atomic<int> calls{0};
    CHECK_THROWS_WITH(parallel_for(100, 3,
                                   [&](std::size_t i) {
                                       ++calls;
                                       if (i == 17 || i == 60) throw std::runtime_error("boom " + std::to_string(i));
                                   }),
                      "boom 17");
    CHECK(calls == 100);
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("thread count resolution", "[parallel]") {
    CHECK(resolve_threads(3) == 3);
    ::setenv("TIMEFUSE_THREADS", "5", 1);
    CHECK(resolve_threads() == 5);
    ::setenv("TIMEFUSE_THREADS", "junk", 1);
    CHECK(resolve_threads() >= 1);
    ::unsetenv("TIMEFUSE_THREADS");
}
