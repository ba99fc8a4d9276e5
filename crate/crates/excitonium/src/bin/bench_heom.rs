use std::time::Instant;

use excitonium::heom::{propagate_heom, HeomConfig, TrappingSpec};
use excitonium::propagation::IntegratorOptions;
use excitonium::trajectory::record_grid;
use excitonium::{BathSpec, ElectronicHamiltonian, SingleExcitationState};

fn main() {
    let h = ElectronicHamiltonian::fmo();
    let trapping = TrappingSpec::fmo_preset();
    let t_total = Instant::now();
    for (site, temp) in [(1usize, 77.0), (6, 77.0), (1, 300.0), (6, 300.0)] {
        let bath = BathSpec::fmo_preset(temp);
        let rho0 = SingleExcitationState::localized(site, 7).unwrap();
        let grid = record_grid(5000.0, 1.0, 1).unwrap();
        let t0 = Instant::now();
        let tr = propagate_heom(
            &h, &bath, &trapping, &rho0, &grid,
            &HeomConfig::default(), &IntegratorOptions::rk4(1.0),
        )
        .unwrap();
        let times = tr.times();
        let e = tr.entanglement_series();
        let (pt, pv) = excitonium::trajectory::peak(&times, &e).unwrap();
        println!(
            "site {site} @ {temp} K: {:.0} s; peak E = {pv:.4} at {pt:.0} fs; E(5ps) = {:.5}; trace(5ps) = {:.4}",
            t0.elapsed().as_secs_f64(),
            e.last().unwrap(),
            tr.trace_series().last().unwrap()
        );
    }
    println!("TOTAL: {:.0} s", t_total.elapsed().as_secs_f64());
}
