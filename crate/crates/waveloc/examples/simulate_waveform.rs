//! Simulate a single footprint waveform from a synthetic point cloud:
//! a flat ground plane plus one canopy blob, probed at the blob's center.
//!
//!     cargo run --example simulate_waveform

use waveloc::pointcloud::PointRecord;
use waveloc::simulator::{count_modes, simulate_waveform, SimParams};

fn main() -> waveloc::Result<()> {
    // ground plane on a 1 m lattice, 60 x 60 m, z = 0
    let mut cloud = Vec::new();
    for i in -30..=30 {
        for j in -30..=30 {
            cloud.push(PointRecord {
                x: i as f64,
                y: j as f64,
                z: 0.0,
                classification: Some(2),
            });
        }
    }
    // canopy: a dense patch of returns 18 m up, offset 3 m east
    for i in -4..=4 {
        for j in -4..=4 {
            cloud.push(PointRecord {
                x: 3.0 + i as f64 * 0.8,
                y: j as f64 * 0.8,
                z: 18.0,
                classification: Some(5),
            });
        }
    }

    let params = SimParams::default();
    let sim = simulate_waveform(&cloud, 0.0, 0.0, &params)?;

    let wf = &sim.waveform;
    println!("simulated {} bins of {} m", wf.len(), wf.bin_size);
    println!(
        "elevation range: {:.2} .. {:.2} m",
        wf.bottom_elevation(),
        wf.top_elevation
    );
    println!("modes detected: {}", count_modes(wf, &params));
    println!("ground elevation: {:.3} m", sim.ground_elevation);

    println!("\nrelative heights (m above ground):");
    for p in [0, 25, 50, 75, 95, 100] {
        println!("  RH{p:<3} = {:>6.2}", sim.rh.height(p).unwrap());
    }

    // a crude textual profile, top of canopy down to the ground
    println!("\namplitude profile (each row = 0.9 m):");
    let peak = wf.amplitudes.iter().cloned().fold(0.0, f64::max);
    for chunk in wf.amplitudes.chunks(6).rev() {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        let bar = "#".repeat((mean / peak * 60.0).round() as usize);
        println!("  |{bar}");
    }
    Ok(())
}
