# Copyright 2026 The segkit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Export a training checkpoint to a SWA1 archive for `segkit swa`.

Only the writer is provided. Loading framework checkpoints is left to the
caller, for example with PyTorch:

    import torch
    state = torch.load("epoch_12.pth", map_location="cpu")["state_dict"]
    write_swa1({k: v.float().numpy() for k, v in state.items()
                if v.is_floating_point()}, "epoch_12.swa1")

Non-float tensors (step counters, integer buffers) should be dropped.
"""

import struct
import sys

import numpy as np


def write_swa1(tensors, path):
    """Writes {name: array} as a canonical SWA1 archive (names sorted by bytes)."""
    items = sorted(((k.encode("utf-8"), np.asarray(v, dtype="<f4")) for k, v in tensors.items()),
                   key=lambda kv: kv[0])
    with open(path, "wb") as f:
        f.write(b"SWA1")
        f.write(struct.pack("<I", len(items)))
        for name, arr in items:
            if len(name) > 0xFFFF or arr.ndim > 0xFF:
                raise ValueError(f"tensor {name!r} cannot be stored")
            f.write(struct.pack("<H", len(name)))
            f.write(name)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr).tobytes())


def main(argv):
    if len(argv) != 3:
        print("usage: export_swa1.py <input.npz> <output.swa1>", file=sys.stderr)
        return 2
    with np.load(argv[1]) as npz:
        write_swa1({k: npz[k] for k in npz.files}, argv[2])
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
