// Temporary diagnostic probe; removed before release.
use sf_compose::agent::TrainedAgent;
use sf_compose::compose::{impact_matrix, Method};
use sf_compose::config::ConfigFile;

fn main() {
    let cfg = ConfigFile::load(std::path::Path::new("/tmp/probe9/run-1-dacgpi/config.toml")).unwrap();
    let run = cfg.resolve_run().unwrap();
    let mut agent = TrainedAgent::init(&run).unwrap();
    agent
        .load_checkpoint(std::path::Path::new(
            "/tmp/probe9/run-1-dacgpi/checkpoint_final.ckpt",
        ))
        .unwrap();
    assert_eq!(agent.method, Method::DacGpi);
    let prims = &agent.prims;
    // Far-field state: rel_pos (10, -10) scaled by 1/20; zero rel_vel.
    let obs = vec![0.5f32, -0.5, 0.0, 0.0];
    let heads = prims.heads_batch(&obs, 1);
    println!("primitive mean actions + stds:");
    for (i, h) in heads.iter().enumerate() {
        println!(
            "  pi{i}: mean ({:+.3},{:+.3}) std ({:.3},{:.3})",
            h[0].mean_action()[0],
            h[0].mean_action()[1],
            h[0].std()[0],
            h[0].std()[1]
        );
    }
    // Psi at each primitive's own mean action.
    println!("Psi columns (rows = features x,y,vel,succ):");
    let mut psi_cols = Vec::new();
    for i in 0..4 {
        let a = heads[i][0].mean_action();
        let psi = prims.sf_min_batch(i, &obs, &a, 1);
        println!("  pi{i} at own action: {psi:?}");
        psi_cols.push(psi);
    }
    // Impact at the centroid of mean actions.
    let mut centroid = vec![0.0f32; 2];
    for h in &heads {
        for (c, v) in centroid.iter_mut().zip(h[0].mean_action()) {
            *c += v / 4.0;
        }
    }
    let p = impact_matrix(prims, &obs, &centroid);
    println!("P rows (a0,a1) x features: {:?}", p.p);
    // khat by hand
    for j in 0..2 {
        let mut khat = vec![0.0f32; 4];
        for k in 0..4 {
            let row: Vec<f32> = (0..4).map(|i| psi_cols[i][k]).collect();
            let mean = row.iter().sum::<f32>() / 4.0;
            let w = [1.0f32, 1.0, 0.0, 1.0][k];
            for i in 0..4 {
                khat[i] += p.get(j, k) * (row[i] - mean).max(0.0) * w;
            }
        }
        println!("khat[a{j}] = {khat:?}");
    }
}
