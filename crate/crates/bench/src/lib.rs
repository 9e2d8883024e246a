//! Fixtures shared by the benchmarks.

use drivecode::optimize::halton;
use drivecode::synthetic::{generate, SyntheticConfig};
use drivecode::predictor::StoreEntry;
use drivecode::{episode_window, DrivingCode, Episode, IdmBounds, IdmParams, KnnStore, VehicleId};

/// A store of `n` entries with codes and parameters spread over plausible ranges.
pub fn store(n: usize) -> KnnStore {
    let iv = IdmBounds::default().intervals();
    KnnStore::new(
        (0..n)
            .map(|i| {
                let u = halton(i as u64 + 1, 8);
                StoreEntry {
                    vehicle_id: VehicleId(i as u32 + 1),
                    code: DrivingCode::new(2.0 * u[0] - 1.0, 30.0 * u[1], Some(0.5 + 3.5 * u[2])),
                    params: IdmParams::from_array(std::array::from_fn(|d| iv[d].lo + u[3 + d] * (iv[d].hi - iv[d].lo))),
                }
            })
            .collect(),
    )
}

/// A 100-frame follower episode in three-lane synthetic traffic.
pub fn episode() -> Episode {
    let t = generate(&SyntheticConfig { seed: 7, frames: 120, ..Default::default() }).expect("synthetic traffic");
    let id = *t.drivers.keys().nth(3).expect("follower");
    episode_window(&t.scene, id, 100).expect("episode")
}
