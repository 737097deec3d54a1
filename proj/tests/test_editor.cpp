#include "c3dag/control.hpp"
#include "c3dag/editor.hpp"
#include "c3dag/error.hpp"
#include "c3dag/image.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <set>
#include <thread>

using namespace c3dag;
using nlohmann::json;

namespace {

struct Running {
    EditorService service;
    int port = -1;
    std::thread thread;

    explicit Running(EditorOptions o = {}) : service(std::move(o)) {
        port = service.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { service.listen_after_bind(); });
        service.wait_until_ready();
    }
    ~Running() {
        service.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

std::uint64_t revision_of(httplib::Client& c) { return json::parse(c.Get("/api/skeleton")->body)["revision"].get<std::uint64_t>(); }

}  // namespace

TEST_CASE("read your writes") {
    Running srv;
    auto c = srv.client();
    const auto before = revision_of(c);
    auto put = c.Put("/api/skeleton/keypoint/nose", "[0.6, 0, 0.4]", "application/json");
    REQUIRE(put);
    CHECK(put->status == 200);
    const json doc = json::parse(c.Get("/api/skeleton")->body);
    CHECK(doc["revision"].get<std::uint64_t>() == before + 1);
    CHECK(doc["skeleton"]["keypoints"]["nose"] == json::array({0.6, 0.0, 0.4}));
    CHECK(doc["stale"] == true);

    CHECK(c.Put("/api/skeleton/keypoint/left_ear", "[0,0,0]", "application/json")->status == 404);
    auto bad = c.Put("/api/skeleton/keypoint/nose", "[0, \"x\", 0]", "application/json");
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["field"] == "body");
    CHECK(revision_of(c) == before + 1);
}

TEST_CASE("mesh build, staleness and export") {
    Running srv;
    auto c = srv.client();
    CHECK(c.Get("/api/mesh.obj")->status == 404);
    auto built = c.Post("/api/mesh", "{\"resolution\": 32}", "application/json");
    REQUIRE(built->status == 200);
    const json info = json::parse(built->body);
    CHECK(info["watertight"] == true);
    CHECK(info["revision"] == revision_of(c));
    CHECK(json::parse(c.Get("/api/skeleton")->body)["stale"] == false);

    // The served OBJ is the OBJ of the snapshot it was built from.
    const auto snap = srv.service.session().snapshot();
    const std::string expected = export_obj(extract_mesh(build_shape(snap.skeleton, snap.body), 32));
    const auto obj = c.Get("/api/mesh.obj");
    CHECK(obj->body == expected);
    CHECK(obj->get_header_value("Content-Type") == "model/obj");

    c.Put("/api/skeleton/keypoint/tail_end", "[-0.5, 0, 0.3]", "application/json");
    CHECK(json::parse(c.Get("/api/skeleton")->body)["stale"] == true);
    CHECK(c.Post("/api/mesh", "", "application/json")->status == 200);
    const json bundle = json::parse(c.Get("/api/export")->body);
    const json server_skeleton = json::parse(c.Get("/api/skeleton")->body)["skeleton"];
    CHECK(bundle["skeleton"] == server_skeleton);
    CHECK(bundle["obj"].get<std::string>() == c.Get("/api/mesh.obj")->body);

    CHECK(c.Post("/api/mesh", "{\"resolution\": 3}", "application/json")->status == 400);
}

TEST_CASE("degenerate skeleton is rejected with 422") {
    Running srv;
    auto c = srv.client();
    const json sk = json::parse(c.Get("/api/skeleton")->body)["skeleton"];
    c.Put("/api/skeleton/keypoint/tail_end", sk["keypoints"]["back_end"].dump(), "application/json");
    auto r = c.Post("/api/mesh", "", "application/json");
    CHECK(r->status == 422);
    CHECK(json::parse(r->body)["error"] == "degenerate bone back_end–tail_end");
    CHECK(c.Post("/api/skeleton/reset", "", "application/json")->status == 200);
    CHECK(c.Post("/api/mesh", "", "application/json")->status == 200);
}

TEST_CASE("config updates") {
    Running srv;
    auto c = srv.client();
    auto ok = c.Put("/api/config", "{\"limb_radius\": 0.07}", "application/json");
    CHECK(ok->status == 200);
    CHECK(json::parse(c.Get("/api/skeleton")->body)["body"]["limb_radius"] == 0.07);
    auto bad = c.Put("/api/config", "{\"limb_radius\": \"thick\"}", "application/json");
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["error"].get<std::string>().find("limb_radius") != std::string::npos);
    CHECK(c.Put("/api/config", "{\"wings\": 2}", "application/json")->status == 400);
}

TEST_CASE("previews") {
    Running srv;
    auto c = srv.client();
    auto back = c.Get("/api/preview/pose?azimuth=180&polar=90");
    REQUIRE(back->status == 200);
    CHECK(back->get_header_value("Content-Type") == "image/png");
    const Rgb8Image img = decode_png(back->body);
    CHECK(img.width == 256);
    const PoseStyle style = default_pose_style({256, 256});
    std::set<std::array<int, 3>> seen;
    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i) seen.insert({img.pixel(i, j)[0], img.pixel(i, j)[1], img.pixel(i, j)[2]});
    for (Keypoint k : {Keypoint::left_eye, Keypoint::right_eye, Keypoint::nose}) {
        const Rgb8 col = style.keypoint_colors[index_of(k)];
        CHECK(seen.count({col.r, col.g, col.b}) == 0);
    }
    const Rgb8 tail = style.keypoint_colors[index_of(Keypoint::tail_end)];
    CHECK(seen.count({tail.r, tail.g, tail.b}) == 1);

    auto depth = c.Get("/api/preview/depth?azimuth=30&polar=70&radius=1.6");
    REQUIRE(depth->status == 200);
    CHECK(depth->body.substr(1, 3) == "PNG");
    auto bad = c.Get("/api/preview/pose?azimuth=north");
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["field"] == "azimuth");
}

TEST_CASE("concurrent mutations are serialised") {
    Running srv;
    const auto start = srv.service.session().snapshot().revision;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            auto c = srv.client();
            for (int i = 0; i < 25; ++i) {
                const double x = 0.5 + 0.001 * (t * 25 + i);
                c.Put("/api/skeleton/keypoint/nose", json::array({x, 0.0, 0.44}).dump(), "application/json");
                const json doc = json::parse(c.Get("/api/skeleton")->body);
                // A snapshot is never torn: the skeleton always validates.
                CHECK_NOTHROW(load_skeleton(doc["skeleton"].dump()));
            }
        });
    for (auto& th : threads) th.join();
    CHECK(srv.service.session().snapshot().revision == start + 100);
}

TEST_CASE("concurrent build reports a definite revision") {
    Running srv;
    std::thread writer([&] {
        auto c = srv.client();
        for (int i = 0; i < 5; ++i)
            c.Put("/api/skeleton/keypoint/nose", json::array({0.5 + 0.01 * i, 0.0, 0.44}).dump(), "application/json");
    });
    auto c = srv.client();
    const json info = json::parse(c.Post("/api/mesh", "{\"resolution\": 24}", "application/json")->body);
    writer.join();
    const auto rev = info["revision"].get<std::uint64_t>();
    CHECK(rev <= 5);
    CHECK(c.Get("/api/mesh.obj")->get_header_value("X-Mesh-Revision") == std::to_string(rev));
}

TEST_CASE("state persistence and static files") {
    const auto dir = std::filesystem::temp_directory_path() / "c3dag_editor_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "www");
    write_file((dir / "www" / "index.html").string(), "<html>editor</html>");
    EditorOptions o;
    o.state_path = (dir / "state.json").string();
    o.static_dir = (dir / "www").string();
    {
        Running srv(o);
        auto c = srv.client();
        c.Put("/api/skeleton/keypoint/tail_end", "[-0.6, 0.1, 0.2]", "application/json");
        c.Put("/api/config", "{\"tail_base_radius\": 0.05}", "application/json");
        auto page = c.Get("/index.html");
        REQUIRE(page);
        CHECK(page->status == 200);
        CHECK(page->body == "<html>editor</html>");
    }
    {
        Running srv(o);
        auto c = srv.client();
        const json doc = json::parse(c.Get("/api/skeleton")->body);
        CHECK(doc["skeleton"]["keypoints"]["tail_end"] == json::array({-0.6, 0.1, 0.2}));
        CHECK(doc["body"]["tail_base_radius"] == 0.05);
    }
    o.static_dir = (dir / "missing").string();
    CHECK_THROWS_AS(EditorService{o}, ConfigError);
    std::filesystem::remove_all(dir);
}
