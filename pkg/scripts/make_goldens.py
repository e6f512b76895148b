"""Regenerate the golden files under src/invsig/data.

Run once after an intentional change to the reference path; the tests
compare fresh computations against these files bitwise.
"""
import hashlib
import io
import json
import sys
from contextlib import redirect_stdout
from pathlib import Path

from invsig import fixtures as fx
from invsig.cli import main
from invsig.hierarchy import forward
from invsig.hw import signature
from invsig.image import save_raster_json

out = Path(__file__).resolve().parents[1] / "src" / "invsig" / "data"
out.mkdir(parents=True, exist_ok=True)

image, bank, spec = fx.golden_signature_setup()
save_raster_json(image, out / "golden_image.json")
bank.save(out / "golden_bank.json")
sig = signature(image, bank, None, spec)
(out / "golden_signature.json").write_text(json.dumps(sig.to_json(), indent=1, sort_keys=True) + "\n")

layers = fx.covariance_layers()
res = forward(image, layers)
record = {
    "top": res.top.to_json(),
    "records": [list(r) for r in res.records],
    "layer_digests": [hashlib.sha256(m.raw.tobytes()).hexdigest() for m in res.maps],
}
(out / "golden_hierarchy.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")

buf = io.StringIO()
with redirect_stdout(buf):
    code = main(["signature", str(out / "golden_image.json"), str(out / "golden_bank.json"), "--pooling", "cdf"])
assert code == 0
digest = hashlib.sha256(buf.getvalue().encode()).hexdigest()
(out / "golden_cli_stdout.sha256").write_text(digest + "\n")
print(digest, file=sys.stderr)
