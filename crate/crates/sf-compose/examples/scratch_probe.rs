// Temporary diagnostic probe; removed before release.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sf_compose::agent::ReplayBuffer;
use sf_compose::envs::{EnvBatch, EnvConfig, EnvKind};
use sf_compose::sflearn::{Hyperparams, NetConfig, Primitive};

fn main() {
    let mut cfg = EnvConfig::defaults(EnvKind::Pointmass2d);
    cfg.batch = 40;
    cfg.seed = 1;
    let mut env = EnvBatch::new(cfg).unwrap();
    let d = env.feature_dim();
    let obs_dim = env.cfg.obs_dim();
    let w_train = vec![1.0f32, 1.0, 0.0, 1.0];

    let net = NetConfig {
        hidden: vec![32, 32],
        lr_psi: 1e-3,
        lr_pi: 3e-4,
        critic_value_scale: 50.0,
        ..NetConfig::default()
    };
    let hp = Hyperparams {
        gamma: 0.95,
        alpha: 0.1,
        batch_size: 128,
        ..Hyperparams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // SAC reduction: one primitive, scalar feature.
    let mut prim: Primitive<f32> = Primitive::new(0, obs_dim, 2, 1, &net, &mut rng);
    let mut replay = ReplayBuffer::new(200_000, obs_dim, 2, d);

    use rand::Rng;
    let probe_obs: Vec<f32> = vec![0.5, -0.5, 0.0, 0.0]; // 10m right, 10m below goal
    for iter in 0..3000 {
        let obs = env.observations();
        // uniform for 100 iters, then policy
        let actions: Vec<f32> = if iter < 100 {
            (0..40 * 2).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
        } else {
            let heads = prim.heads(&obs, 40);
            let mut a = Vec::with_capacity(80);
            for h in &heads {
                let noise: Vec<f32> = (0..2).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
                a.extend(h.sample(&noise).action);
            }
            a
        };
        let out = env.step(&actions).unwrap();
        let next_obs = env.observations();
        for i in 0..40 {
            replay.push(
                &obs[i * obs_dim..(i + 1) * obs_dim],
                &actions[i * 2..(i + 1) * 2],
                &out.features[i * d..(i + 1) * d],
                &next_obs[i * obs_dim..(i + 1) * obs_dim],
                out.episode_done,
            );
        }
        if replay.len() >= 128 {
            let batch = replay.sample(128, Some(&w_train), &mut rng);
            let stats = prim.update(&batch, &hp, hp.alpha, &mut rng);
            if iter % 250 == 0 {
                let heads = prim.heads(&probe_obs, 1);
                let ma = heads[0].mean_action();
                let xa = vec![
                    probe_obs[0], probe_obs[1], probe_obs[2], probe_obs[3], ma[0], ma[1],
                ];
                let q = prim.critic.sf_min(&xa, 1);
                // Also Q at the "correct" action (toward goal = negative x... rel_pos=(10,-10) scaled (0.5,-0.5): push -x +y)
                let xgood = vec![probe_obs[0], probe_obs[1], probe_obs[2], probe_obs[3], -1.0, 1.0];
                let qgood = prim.critic.sf_min(&xgood, 1);
                println!(
                    "iter {iter:5} sf_loss {:9.3} pi_obj {:9.3} mean_act ({:+.3},{:+.3}) std ({:.3},{:.3}) Q(mean)={:8.1} Q(good)={:8.1}",
                    stats.sf_loss,
                    stats.pi_objective,
                    ma[0],
                    ma[1],
                    heads[0].std()[0],
                    heads[0].std()[1],
                    q[0],
                    qgood[0]
                );
            }
        }
    }
}
