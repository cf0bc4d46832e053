"""Regenerate ``src/mofscreen/data/elements.csv`` from the mendeleev database.

Developer tool only; the package reads the generated CSV and never imports
mendeleev at runtime.

    pip install mendeleev
    python tools/build_element_table.py
"""
from pathlib import Path

from mendeleev import element

BOHR3_TO_A3 = 0.529177210903**3

# Cordero et al. (2008) list C as sp3/sp2/sp; bond perception uses sp3.
COVALENT_OVERRIDES = {"C": 0.76}
# metalloids counted as non-metals
NONMETALS = {
    "H", "He", "B", "C", "N", "O", "F", "Ne", "Si", "P", "S", "Cl", "Ar",
    "As", "Se", "Br", "Kr", "Te", "I", "Xe", "At", "Rn",
}
HEADER = ("symbol,atomic_number,mass,covalent_radius,vdw_radius,atomic_radius_pm,"
          "polarizability,electron_affinity,mulliken_en,is_metal,is_lanthanide,group")


def fmt(x, digits=6):
    return "" if x is None else f"{x:.{digits}g}"


def main():
    out = Path(__file__).resolve().parents[1] / "src/mofscreen/data/elements.csv"
    lines = [
        "# Element data. Sources: IUPAC standard atomic weights; covalent radii",
        "# Cordero et al. Dalton Trans. 2008 (C as sp3); van der Waals radii and",
        "# empirical atomic radii (Slater 1964) from the mendeleev compilation;",
        "# static dipole polarizabilities Schwerdtfeger & Nagle 2018 table (A^3);",
        "# electron affinities (eV, unbound anions listed as 0) and Mulliken",
        "# electronegativity (IE1 + EA)/2 in eV via mendeleev.",
        HEADER,
    ]
    for z in range(1, 97):
        e = element(z)
        cov = COVALENT_OVERRIDES.get(e.symbol, (e.covalent_radius_cordero or 150.0) / 100.0)
        vdw = (e.vdw_radius or 200.0) / 100.0
        pol = e.dipole_polarizability * BOHR3_TO_A3 if e.dipole_polarizability else None
        ea = max(e.electron_affinity or 0.0, 0.0)
        ie1 = e.ionenergies.get(1)
        mull = (ie1 + ea) / 2.0 if ie1 is not None else None
        lan = 57 <= z <= 71
        lines.append(",".join([
            e.symbol, str(z), fmt(e.atomic_weight, 8), fmt(cov, 4), fmt(vdw, 4),
            fmt(e.atomic_radius, 5), fmt(pol, 6), fmt(ea, 6), fmt(mull, 6),
            "0" if e.symbol in NONMETALS else "1", "1" if lan else "0",
            str(e.group_id or 0),
        ]))
    out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
