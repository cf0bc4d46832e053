"""Regenerate ``src/mofscreen/data/forcefield.def``.

Framework LJ rows are converted from the UFF nonbond table (Rappe et al.,
J. Am. Chem. Soc. 114, 10024 (1992)): x_i is the vdW distance (A), D_i the
well depth (kcal/mol); sigma = x_i / 2**(1/6), epsilon/k_B = D_i * 503.2195 K.
"""
import math
from pathlib import Path

KCAL_TO_K = 4184.0 / 8.314462618

# element: (x_i [A], D_i [kcal/mol])
UFF = {
    "H": (2.886, 0.044), "He": (2.362, 0.056), "Li": (2.451, 0.025), "Be": (2.745, 0.085),
    "B": (4.083, 0.180), "C": (3.851, 0.105), "N": (3.660, 0.069), "O": (3.500, 0.060),
    "F": (3.364, 0.050), "Ne": (3.243, 0.042), "Na": (2.983, 0.030), "Mg": (3.021, 0.111),
    "Al": (4.499, 0.505), "Si": (4.295, 0.402), "P": (4.147, 0.305), "S": (4.035, 0.274),
    "Cl": (3.947, 0.227), "Ar": (3.868, 0.185), "K": (3.812, 0.035), "Ca": (3.399, 0.238),
    "Sc": (3.295, 0.019), "Ti": (3.175, 0.017), "V": (3.144, 0.016), "Cr": (3.023, 0.015),
    "Mn": (2.961, 0.013), "Fe": (2.912, 0.013), "Co": (2.872, 0.014), "Ni": (2.834, 0.015),
    "Cu": (3.495, 0.005), "Zn": (2.763, 0.124), "Ga": (4.383, 0.415), "Ge": (4.280, 0.379),
    "As": (4.230, 0.309), "Se": (4.205, 0.291), "Br": (4.189, 0.251), "Kr": (4.141, 0.220),
    "Rb": (4.114, 0.040), "Sr": (3.641, 0.235), "Y": (3.345, 0.072), "Zr": (3.124, 0.069),
    "Nb": (3.165, 0.059), "Mo": (3.052, 0.056), "Tc": (2.998, 0.048), "Ru": (2.963, 0.056),
    "Rh": (2.929, 0.053), "Pd": (2.899, 0.048), "Ag": (3.148, 0.036), "Cd": (2.848, 0.228),
    "In": (4.463, 0.599), "Sn": (4.392, 0.567), "Sb": (4.420, 0.449), "Te": (4.470, 0.398),
    "I": (4.500, 0.339), "Xe": (4.404, 0.332), "Cs": (4.517, 0.045), "Ba": (3.703, 0.364),
    "La": (3.522, 0.017), "Ce": (3.556, 0.013), "Pr": (3.606, 0.010), "Nd": (3.575, 0.010),
    "Pm": (3.547, 0.009), "Sm": (3.520, 0.008), "Eu": (3.493, 0.008), "Gd": (3.368, 0.009),
    "Tb": (3.451, 0.007), "Dy": (3.428, 0.007), "Ho": (3.409, 0.007), "Er": (3.391, 0.007),
    "Tm": (3.374, 0.006), "Yb": (3.355, 0.228), "Lu": (3.640, 0.041), "Hf": (3.141, 0.072),
    "Ta": (3.170, 0.081), "W": (3.069, 0.067), "Re": (2.954, 0.066), "Os": (3.120, 0.037),
    "Ir": (2.840, 0.073), "Pt": (2.754, 0.080), "Au": (3.293, 0.039), "Hg": (2.705, 0.385),
    "Tl": (4.347, 0.680), "Pb": (4.297, 0.663), "Bi": (4.370, 0.518), "Po": (4.709, 0.325),
    "At": (4.750, 0.284), "Rn": (4.765, 0.248), "Fr": (4.900, 0.050), "Ra": (3.677, 0.404),
    "Ac": (3.478, 0.033), "Th": (3.396, 0.026), "Pa": (3.424, 0.022), "U": (3.395, 0.022),
    "Np": (3.424, 0.019), "Pu": (3.424, 0.016), "Am": (3.381, 0.014), "Cm": (3.326, 0.013),
}

MASS = {"H": 1.008, "O": 15.999}
R_OH_PAPER = 0.9527
THETA_HOH = 104.52


def water_sites(r_oh):
    """TIP3P sites in a body frame whose origin is the centre of mass."""
    half = math.radians(THETA_HOH / 2.0)
    hx, hz = r_oh * math.sin(half), r_oh * math.cos(half)
    zcom = 2 * MASS["H"] * hz / (2 * MASS["H"] + MASS["O"])
    return [("O", 0.0, 0.0, -zcom), ("H1", hx, 0.0, hz - zcom), ("H2", -hx, 0.0, hz - zcom)]


def main():
    out = Path(__file__).resolve().parents[1] / "src/mofscreen/data/forcefield.def"
    lines = [
        "# mofscreen force field, version 1",
        "# energies epsilon/k_B in K, lengths in A, charges in e",
        "",
        "[framework_lj]",
        "# UFF nonbond (Rappe et al. 1992): sigma = x/2^(1/6), eps = D * 503.2195 K",
    ]
    for el, (x, d) in UFF.items():
        lines.append(f"{el} {d * KCAL_TO_K:.4f} {x / 2 ** (1 / 6):.4f}")
    o, h1, h2 = water_sites(R_OH_PAPER)
    lines += [
        "",
        "[guest I2]",
        "# single LJ sphere from pure-I2 gas viscosity",
        "# (Bird, Stewart & Lightfoot, Transport Phenomena, Table E.1)",
        "molefraction 0.0003",
        "molweight 253.80894",
        "I2 0.0 0.0 0.0 550.0 4.982 0.0",
        "",
        "[guest H2O]",
        "# TIP3P (Jorgensen et al. 1983): eps_O 0.1521 kcal/mol, sigma_O 3.15061 A",
        "# default r_OH 0.9527 A; the canonical TIP3P 0.9572 A is applied by",
        "# load_forcefield(tip3p_canonical=True). origin = centre of mass",
        "molefraction 0.122",
        "molweight 18.01528",
    ]
    for label, x, y, z in (o, h1, h2):
        if label == "O":
            lines.append(f"O {x:.6f} {y:.6f} {z:.6f} 76.5389 3.15061 -0.834")
        else:
            lines.append(f"{label} {x:.6f} {y:.6f} {z:.6f} 0.0 1.0 0.417")
    lines += [
        "",
        "[guest N2]",
        "# TraPPE three-site N2 (Potoff & Siepmann 2001), bond 1.10 A, massless COM charge",
        "molefraction 0.685",
        "molweight 28.0134",
        "N1 0.0 0.0 0.55 36.0 3.31 -0.482",
        "COM 0.0 0.0 0.0 0.0 1.0 0.964",
        "N2 0.0 0.0 -0.55 36.0 3.31 -0.482",
        "",
        "[guest O2]",
        "# three-site O2 (Zhang & Siepmann 2006), bond 1.21 A, massless COM charge",
        "molefraction 0.184",
        "molweight 31.9988",
        "O1 0.0 0.0 0.605 49.0 3.02 -0.113",
        "COM 0.0 0.0 0.0 0.0 1.0 0.226",
        "O2 0.0 0.0 -0.605 49.0 3.02 -0.113",
        "",
        "[guest He]",
        "# void-fraction probe (Hirschfelder, Curtiss & Bird)",
        "molefraction 1.0",
        "molweight 4.002602",
        "He 0.0 0.0 0.0 10.9 2.64 0.0",
    ]
    out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
