//! Feed conversion from house totals and from the area-normalised outputs
//! the surrogates predict. Both forms agree.

use aviary::domain::{fcr_basic, fcr_normalized, living_birds, normalize_by_area};
use aviary::HouseGeometry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let house = HouseGeometry::large();
    let placed = 24_000u64;
    let deaths = [12, 9, 7, 6, 6, 5, 5];
    let nlb = living_birds(placed, &deaths, deaths.len())?;

    // a week-old flock: 180 g birds that ate 3.6 t between them
    let (mdw, dfc) = (180.0, 3_600.0);
    let n = normalize_by_area(deaths[6] as f64, nlb as f64, dfc, &house, nlb as f64)?;
    println!("living birds   {nlb}");
    println!("birds per m²   {:.3}", n.nlbpa);
    println!("feed per bird  {:.4} kg", n.dfcpb);
    println!("FCR (totals)   {:.4}", fcr_basic(dfc, nlb as f64, mdw)?);
    println!(
        "FCR (per bird) {:.4}",
        fcr_normalized(n.dfcpb, n.nlbpa, mdw)?
    );
    Ok(())
}
