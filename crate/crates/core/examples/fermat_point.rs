//! Fermat points, weighted Fermat points and Steiner triods.
//!
//! cargo run --release --example fermat_point

use triod_flow::geometry::{self, PlanarTriod};
use triod_flow::EndpointSet;

fn main() -> triod_flow::Result<()> {
    let triangles = [
        ("equilateral", EndpointSet::equilateral(1.0)),
        ("skewed", EndpointSet::from_coords([[0.0, 0.0], [2.0, 0.0], [0.8, 1.6]])?),
        ("flat", EndpointSet::from_coords([[0.0, 0.0], [1.0, 0.0], [0.5, 0.05]])?),
    ];
    for (name, endpoints) in &triangles {
        let angles: Vec<String> = endpoints.interior_angles().iter().map(|a| format!("{:.1}", a.to_degrees())).collect();
        print!("{name:12} angles [{}] ", angles.join(", "));
        match geometry::fermat_point(endpoints) {
            Ok(p) => {
                let steiner = geometry::steiner_triod(endpoints, 64)?;
                let length: f64 = endpoints.points.iter().map(|q| (q - p).norm()).sum();
                println!("Fermat point ({:.6}, {:.6}), network length {length:.6}", p.x, p.y);
                let spokes = PlanarTriod::spokes(endpoints, p, 64);
                println!("{:12} spoke triod matches steiner_triod to {:.1e}", "", geometry::triod_distance(&spokes, &steiner));
            }
            Err(e) => println!("{e}"),
        }
    }

    let endpoints = &triangles[1].1;
    for weights in [[1.0, 1.0, 1.0], [1.0, 1.2, 0.9], [1.0, 1.0, 1.9]] {
        match geometry::weighted_fermat_point(endpoints, &weights) {
            Ok(p) => println!("weights {weights:?}: ({:.6}, {:.6})", p.x, p.y),
            Err(e) => println!("weights {weights:?}: {e}"),
        }
    }
    Ok(())
}
