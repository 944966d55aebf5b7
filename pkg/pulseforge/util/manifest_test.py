import enum
import hashlib
import json
import os
import tempfile
import unittest
from dataclasses import dataclass

import numpy as np

from pulseforge.util import manifest


class _Color(enum.Enum):
    RED = "red"


@dataclass
class _Settings:
    rate: float
    color: _Color
    sizes: tuple


class TestManifest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "sweep.csv")
        with open(self.out, "w") as handle:
            handle.write("noise_value,gate_error,sequence_id\n")

    def tearDown(self):
        self.tmp.cleanup()

    def test_digest(self):
        with open(self.out, "rb") as handle:
            expected = hashlib.sha256(handle.read()).hexdigest()
        self.assertEqual(manifest.sha256_digest(self.out), expected)

    def test_jsonable_config(self):
        converted = manifest.to_jsonable({
            "settings": _Settings(np.float64(0.5), _Color.RED, (1, 2)),
            "grid": np.array([1.0, 2.0]),
        })
        self.assertEqual(converted, {
            "settings": {"rate": 0.5, "color": "red", "sizes": [1, 2]},
            "grid": [1.0, 2.0],
        })
        json.dumps(converted)

    def test_write_and_read(self):
        run = manifest.RunManifest.start("sweep", {"axis": "dh"}, {"seed": 3})
        run.record_output(self.out)
        path = run.finish().write(self.out)
        self.assertEqual(str(path), self.out + ".manifest.json")
        self.assertGreaterEqual(run.wall_clock, 0.0)

        loaded = manifest.read_manifest(path)
        self.assertEqual(loaded, run)
        self.assertEqual(loaded.version, run.version)
        self.assertEqual(manifest.verify_outputs(loaded), {self.out: True})

    def test_changed_output_detected(self):
        run = manifest.RunManifest.start("sweep")
        run.record_output(self.out)
        with open(self.out, "a") as handle:
            handle.write("0.001,1e-06,naive\n")
        self.assertEqual(manifest.verify_outputs(run), {self.out: False})

    def test_sorted_keys(self):
        path = manifest.RunManifest.start("solve").finish().write(self.out)
        document = json.loads(open(path).read())
        self.assertEqual(list(document), sorted(document))


if __name__ == '__main__':
    unittest.main()
