#!/usr/bin/env python3
"""Convert the Hipparcos-2 main table (I/311 hip2.dat) into the delimited text
catalog read by `starid build-catalog`.

Usage: convert_hip2.py <hip2.dat> <out.csv>

hip2.dat columns used (whitespace separated): 1 HIP, 5 RArad, 6 DErad, 20 Hpmag.
The Hipparcos-2 table ships with the `hipparcos-catalog` PyPI wheel
(hipparcos_catalog/data/hip2.dat).
"""
import math
import sys


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 1
    src, dst = sys.argv[1], sys.argv[2]
    with open(src) as fin, open(dst, "w") as fout:
        fout.write("HIP,RAdeg,DEdeg,Hpmag\n")
        for line in fin:
            f = line.split()
            if len(f) < 20:
                continue
            ra = math.degrees(float(f[4])) % 360.0
            de = math.degrees(float(f[5]))
            fout.write(f"{int(f[0])},{ra:.9f},{de:.9f},{f[19]}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
