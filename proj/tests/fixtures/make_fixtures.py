"""Regenerates the golden little-endian fixtures used by test_ingest.

Written independently of the C++ writers so the byte layout is checked
against a second implementation.
"""
import struct

def emb(dim, count, records):
    out = b"NCEMB1\0\0" + struct.pack("<IIQ", 1, dim, count)
    for label, vec in records:
        out += struct.pack("<I", label) + struct.pack("<%df" % dim, *vec)
    return out

def wgt(c, d, rows, biases=None):
    out = b"NCWGT1\0\0" + struct.pack("<IIIB3x", 1, c, d, 1 if biases is not None else 0)
    for row in rows:
        out += struct.pack("<%df" % d, *row)
    if biases is not None:
        out += struct.pack("<%df" % c, *biases)
    return out

def sta(d, classes):
    out = b"NCSTA1\0\0" + struct.pack("<III", 1, len(classes), d)
    for count, mean, m2 in classes:
        out += struct.pack("<Q", count) + struct.pack("<%dd" % d, *mean) + struct.pack("<d", m2)
    return out

files = {
    "emb_single.bin": emb(2, 1, [(3, [1.0, 2.0])]),
    "emb_truncated.bin": emb(2, 2, [(3, [1.0, 2.0])]),
    "wgt_identity.bin": wgt(2, 2, [[1, 0], [0, 1]]),
    "wgt_bias.bin": wgt(2, 2, [[1, 0], [0, 1]], [0.5, -0.5]),
    "sta_one.bin": sta(1, [(3, [2.0], 2.0)]),
    "sta_negative_m2.bin": sta(1, [(3, [2.0], -0.001)]),
}
for name, data in files.items():
    with open(name, "wb") as f:
        f.write(data)
