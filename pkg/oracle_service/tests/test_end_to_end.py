"""Full-stack smoke: live sidecar behind the attack CLI's sweep command.

Requires the `advrain` package; the two components interact only through
the HTTP protocol and files on disk.
"""

import json
import socket
import threading
import time

import numpy as np
import pytest
import uvicorn

advrain_cli = pytest.importorskip("advrain.cli")
from advrain.imagecore import ImageBuffer, save_image  # noqa: E402

from oracle_service.app import create_app  # noqa: E402
from oracle_service.models import build_model  # noqa: E402

RECT = (24, 24, 40, 40)


@pytest.fixture(scope="module")
def server_url():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    app = create_app(build_model("tinycnn"))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("sidecar failed to start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def make_dataset(root, count=50):
    class_dir = root / "data" / "bright"
    class_dir.mkdir(parents=True)
    for i in range(count):
        rng = np.random.default_rng(5000 + i)
        a = rng.uniform(0.0, 0.25, (64, 64, 1))
        x0, y0, x1, y1 = RECT
        a[y0:y1, x0:x1] = 1.0
        save_image(ImageBuffer(a), class_dir / f"{i:03d}.png")
    (root / "data" / "labels.json").write_text(json.dumps({"bright": 1}))


def test_sweep_against_live_model(tmp_path, server_url):
    start = time.time()
    make_dataset(tmp_path)
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({
        "dataset_dir": "data",
        "output_dir": "out",
        "oracle": {"mode": "http", "endpoint": server_url, "class_count": 2,
                   "timeout_ms": 60000},
        "search": {"iterations": 3, "candidates_per_iter": 4, "drop_count": 10,
                   "drop_radius": 10.0, "rng_seed": 0},
    }))
    code = advrain_cli.main(["sweep", "--config", str(config_path),
                             "--drops", "10,20", "--radii", "10"])
    assert code == 0
    lines = (tmp_path / "out" / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    rows = [dict(zip(lines[0].split(","), line.split(","))) for line in lines[1:]]
    by_n = {int(r["n_drops"]): r for r in rows}
    assert set(by_n) == {10, 20}
    assert float(by_n[10]["clean_acc"]) >= 0.9  # model solves the clean task
    # more drops never help the victim (drop-count trend)
    assert float(by_n[20]["adv_acc"]) <= float(by_n[10]["adv_acc"])
    assert float(by_n[20]["mean_ssim"]) <= float(by_n[10]["mean_ssim"])
    elapsed = time.time() - start
    assert elapsed < 900  # CPU budget
    print(f"PASS: live-model sweep trend adv_acc(n=20) <= adv_acc(n=10) "
          f"({by_n[10]['adv_acc']} -> {by_n[20]['adv_acc']}, {elapsed:.0f}s)")
