"""Henry-regime check on one toy framework: Widom insertion against a low-pressure GCMC run.

    python demos/widom_and_gcmc.py
"""
from pathlib import Path

from mofscreen import elements
from mofscreen.constants import KB
from mofscreen.gcmc import SimulationConditions, run_gcmc
from mofscreen.potential import Framework, load_forcefield
from mofscreen.structio import build_supercell, read_cif
from mofscreen.widom import framework_density_kg_m3, heat_of_adsorption, henry_coefficient, widom_sample

T = 423.0


def main():
    ff = load_forcefield()
    s = read_cif(Path(elements.data_path("toy_corpus")) / "toy_zn_dicarboxylate.cif")
    fw = Framework(build_supercell(s, 12.0), ff)
    g = ff.guests["I2"]
    smp = widom_sample(fw, g, T, 50_000, seed=1)
    kh = henry_coefficient(smp.w, T, framework_density_kg_m3(fw))
    print(f"{s.name}: {len(fw.positions)} framework atoms, supercell volume {fw.volume:.0f} A^3")
    print(f"Widom  K_H = {kh:.4g} mol/kg/Pa   Q_st = {heat_of_adsorption(smp.w, smp.uw, T):.2f} kJ/mol")

    # pressure chosen for about 0.05 molecules per supercell
    p = 0.05 * KB * T / (smp.w * fw.volume * 1e-30)
    res = run_gcmc(fw, SimulationConditions(T, p, [g.with_mole_fraction(1.0)], 500, 5000, seed=2))
    sp = res.species[0]
    print(f"GCMC   {p:.3g} Pa: {sp.uptake_mg_g:.4g} mg/g   Henry law predicts {kh * p * g.molweight:.4g} mg/g")


if __name__ == "__main__":
    main()
