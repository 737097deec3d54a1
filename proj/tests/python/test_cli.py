import json
import os
import re
import subprocess
import time
import urllib.request
from pathlib import Path

import pytest

CLI = os.environ.get("C3DAG_CLI", "c3dag")
WEB = os.environ.get("C3DAG_WEB", str(Path(__file__).resolve().parents[2] / "web"))


def run(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True, timeout=300)


def test_mesh(tmp_path):
    skel = tmp_path / "s.json"
    skel.write_text(json.dumps({"version": 1, "keypoints": {}, "bones": []}))
    bad = run("mesh", "--skeleton", skel, "--out", tmp_path / "m.obj")
    assert bad.returncode != 0 and bad.stderr.startswith("error:")

    out = tmp_path / "m.obj"
    r = run("mesh", "--out", out, "--resolution", 32)
    assert r.returncode == 0, r.stderr
    assert out.read_text().startswith("v ")
    shape = json.loads((tmp_path / "m.shape.json").read_text())
    assert len(shape["primitives"]) == 12


def test_render_pose_back_view_hides_head(tmp_path):
    from PIL import Image

    back = tmp_path / "back.png"
    front = tmp_path / "front.png"
    assert run("render-pose", "--radius", 3, "--azimuth", 180, "--polar", 90, "--out", back).returncode == 0
    assert run("render-pose", "--radius", 3, "--azimuth", 0, "--polar", 90, "--out", front).returncode == 0

    # Keypoint colours: hue 360k/18 at full saturation and value.
    import colorsys

    def keypoint_color(k):
        return tuple(round(255 * c) for c in colorsys.hsv_to_rgb(k / 18, 1.0, 1.0))

    head = {keypoint_color(k) for k in range(3)}
    back_colors = {c for _, c in Image.open(back).convert("RGB").getcolors(1 << 20)}
    front_colors = {c for _, c in Image.open(front).convert("RGB").getcolors(1 << 20)}
    assert not head & back_colors
    assert head <= front_colors


def test_render_depth(tmp_path):
    from PIL import Image

    out = tmp_path / "d.png"
    assert run("render-depth", "--width", 48, "--height", 48, "--out", out).returncode == 0
    img = Image.open(out)
    assert img.size == (48, 48)
    pfm = tmp_path / "d.pfm"
    assert run("render-depth", "--width", 16, "--height", 8, "--out", pfm).returncode == 0
    assert pfm.read_bytes().startswith(b"Pf\n16 8\n")


def test_usage_errors_exit_2():
    for args in (["frobnicate"], ["mesh", "--out", "x.obj", "--bogus"], ["render-pose"], []):
        r = run(*args)
        assert r.returncode == 2, args
        assert "Usage" in r.stderr


def test_curate(tmp_path):
    names = [
        "left_eye", "right_eye", "nose", "neck_end", "front_left_thigh", "front_right_thigh",
        "rear_left_thigh", "rear_right_thigh", "front_left_knee", "front_right_knee", "rear_left_knee",
        "rear_right_knee", "front_left_paw", "front_right_paw", "rear_left_paw", "rear_right_paw",
        "back_end", "tail_end",
    ]
    src = tmp_path / "ann"
    src.mkdir()
    for i in range(4):
        kp = {n: ([10 + 2 * j, 20 + i] if j < 4 + 4 * i else None) for j, n in enumerate(names)}
        (src / f"{i}.json").write_text(json.dumps({"image_size": [64, 64], "species": "horse", "keypoints": kp}))
    out = tmp_path / "out"
    r = run("--seed", 4, "curate", src, "--out", out, "--threshold", 0.5)
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    # 4, 8, 12, 16 of 18 annotated: the last two reach one half.
    assert report["total"] == 4 and report["kept"] == 2
    assert sorted(p.name for p in out.glob("control_*.png")) == ["control_00000.png", "control_00001.png"]
    again = tmp_path / "again"
    run("--seed", 4, "curate", src, "--out", again, "--threshold", 0.5)
    assert (again / "control_00000.png").read_bytes() == (out / "control_00000.png").read_bytes()


def test_optimize_stage_1_only(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "output_dir": "run",
        "grid": {"resolution": 8},
        "render": {"width": 8, "height": 8, "n_samples": 8},
        "stage1": {"iters": 3},
        "stage2": {"iters": 3},
    }))
    r = run("--config", cfg, "--seed", 2, "optimize", "--stage", 1)
    assert r.returncode == 0, r.stderr
    out = tmp_path / "run"
    assert (out / "stage1.grid").read_bytes()[:4] == b"C3DG"
    assert len((out / "report_stage1.jsonl").read_text().splitlines()) == 3
    assert not (out / "stage2.grid").exists()

    r = run("--config", cfg, "optimize", "--stage", 2, "--init", out / "stage1.grid")
    assert r.returncode == 0, r.stderr
    first = json.loads((out / "report_stage2.jsonl").read_text().splitlines()[0])
    assert first["omega"] == 50.0

    assert run("--config", cfg, "optimize", "--stage", 3).returncode == 2


@pytest.fixture
def server(tmp_path):
    proc = subprocess.Popen([CLI, "serve", "--port", "0", "--static", WEB, "--state", str(tmp_path / "state.json"),
                             "--mesh-resolution", "24"], stdout=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    port = int(re.search(r":(\d+)$", line.strip()).group(1))
    yield f"http://127.0.0.1:{port}", tmp_path
    proc.terminate()
    assert proc.wait(timeout=10) == 0


def fetch(url, method="GET", body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=60) as res:
        return res.status, res.headers, res.read()


def test_serve(server):
    base, tmp = server
    status, headers, page = fetch(base + "/")
    assert status == 200 and b"<title>" in page
    status, _, js = fetch(base + "/app.js")
    assert status == 200 and b"/api/skeleton" in js

    _, _, body = fetch(base + "/api/skeleton")
    state = json.loads(body)
    rev = state["revision"]
    _, _, body = fetch(base + "/api/skeleton/keypoint/tail_end", "PUT", [-0.5, 0.0, 0.6])
    assert json.loads(body)["revision"] == rev + 1
    _, _, body = fetch(base + "/api/mesh", "POST", {})
    mesh = json.loads(body)
    assert mesh["watertight"] and mesh["revision"] == rev + 1
    _, headers, obj = fetch(base + "/api/mesh.obj")
    assert headers["X-Mesh-Revision"] == str(rev + 1) and obj.startswith(b"v ")
    saved = json.loads((tmp / "state.json").read_text())
    assert saved["skeleton"]["keypoints"]["tail_end"] == [-0.5, 0.0, 0.6]
