"""Write the three toy frameworks used by the bundled screening demo and tests."""
from pathlib import Path

import numpy as np

from mofscreen.structio import CrystalStructure, write_cif

OUT = Path(__file__).resolve().parents[1] / "src" / "mofscreen" / "data" / "toy_corpus"


def _axis_frame(axis, plane):
    u = np.eye(3)[axis]
    v = np.asarray(plane, dtype=float)
    return u, v / np.linalg.norm(v)


def cu_bipyridine():
    """Cu at the origin, 4,4'-bipyridine along each axis (Cu-N 2.0 A, ring bond 1.39 A)."""
    bond, cun, cc = 1.39, 2.0, 1.49
    a = 2 * cun + 4 * bond + cc
    syms, pos = ["Cu"], [np.zeros(3)]
    # a- and b-linker rings stand along c; the c-linker ring sits on the diagonal
    for axis, plane in ((0, (0, 0, 1)), (1, (0, 0, 1)), (2, (1, 1, 0))):
        u, v = _axis_frame(axis, plane)
        for centre_x, n_at in ((cun + bond, 3), (a - cun - bond, 0)):
            centre = centre_x * u
            for k in range(6):
                th = np.pi * k / 3
                p = centre + bond * (np.cos(th) * u + np.sin(th) * v)
                syms.append("N" if k == n_at else "C")
                pos.append(p)
                if k not in (0, 3):
                    syms.append("H")
                    pos.append(centre + (bond + 1.08) * (np.cos(th) * u + np.sin(th) * v))
    return CrystalStructure("toy_cu_bipyridine", (a, a, a), (90, 90, 90), syms, np.array(pos) / a)


def zn_dicarboxylate():
    """Zn at the origin, chelating benzene-1,4-dicarboxylate along each axis."""
    zc, cc, ring = 2.5, 1.5, 1.39
    a = 2 * zc + 2 * cc + 2 * ring
    syms, pos = ["Zn"], [np.zeros(3)]
    for axis, plane in ((0, (0, 1, 0)), (1, (0, 0, 1)), (2, (1, 0, 0))):
        u, v = _axis_frame(axis, plane)
        for sgn, xc in ((1, zc), (-1, a - zc)):
            c = xc * u
            syms += ["C", "O", "O"]
            pos += [c, c - sgn * 0.635 * u + 1.1 * v, c - sgn * 0.635 * u - 1.1 * v]
        centre = 0.5 * a * u
        for k in range(6):
            th = np.pi * k / 3
            syms.append("C")
            pos.append(centre + ring * (np.cos(th) * u + np.sin(th) * v))
            if k not in (0, 3):
                syms.append("H")
                pos.append(centre + (ring + 1.08) * (np.cos(th) * u + np.sin(th) * v))
    return CrystalStructure("toy_zn_dicarboxylate", (a, a, a), (90, 90, 90), syms, np.array(pos) / a)


def la_oxide():
    """Dense ReO3-type La-O net; its windows are too narrow for I2."""
    a = 5.2
    frac = np.array([[0, 0, 0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5]])
    return CrystalStructure("toy_la_oxide", (a, a, a), (90, 90, 90), ["La", "O", "O", "O"], frac)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for s in (cu_bipyridine(), zn_dicarboxylate(), la_oxide()):
        (OUT / f"{s.name}.cif").write_text(write_cif(s))
        print(s.name, len(s))
