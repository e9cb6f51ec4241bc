//! Three simulated houses behind the framed link. The master sends a day
//! plan to each house, the day advances and telemetry is read back.

use aviary::condosim::{run_condominium, CondoConfig};
use aviary::protocol::payload::telemetry_request;
use aviary::protocol::{Frame, FunctionCode, Master, MasterConfig, PlanWrite, Status, Telemetry};
use aviary::DayPlan;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let condo = run_condominium(&CondoConfig::with_houses(3), "127.0.0.1:0").await?;
    let master = Master::new(condo.local_addr(), MasterConfig::default());
    let plan = DayPlan {
        day: 1,
        t_min: 31.0,
        t_avg: 32.5,
        t_max: 34.0,
        h_min: 55.0,
        h_avg: 60.0,
        h_max: 65.0,
    };

    for address in 1..=3u8 {
        let status = Status::decode(
            &master
                .transact(&Frame::new(address, FunctionCode::ReportStatus, vec![]))
                .await?
                .reply
                .payload,
        )?;
        let write = PlanWrite::new(status.flock_id, &plan)?;
        master
            .transact(&Frame::new(
                address,
                FunctionCode::WriteDayPlan,
                write.encode(),
            ))
            .await?;
    }
    condo.advance_day();

    for address in 1..=3u8 {
        let reply = master
            .transact(&Frame::new(
                address,
                FunctionCode::ReadTelemetry,
                telemetry_request(None)?,
            ))
            .await?;
        let t = Telemetry::decode(&reply.reply.payload)?;
        println!(
            "house {address}: flock {} day {} weight {:.1} g, {} birds, {} died",
            t.flock_id,
            t.day(),
            t.mdw_g(),
            t.nlb,
            t.dm
        );
    }
    println!("{} frames exchanged", master.events().len());
    condo.stop().await;
    Ok(())
}
