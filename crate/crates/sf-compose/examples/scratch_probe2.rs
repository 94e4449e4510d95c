// Temporary diagnostic probe; removed before release.
use sf_compose::agent::{train, RunConfig};
use sf_compose::compose::Method;
use sf_compose::envs::{EnvConfig, EnvKind, TaskSpec};

fn main() {
    let mut env = EnvConfig::defaults(EnvKind::Pointmass2d);
    env.batch = 40;
    let mut cfg = RunConfig::defaults(Method::Sac, env).unwrap();
    cfg.seed = 1;
    cfg.total_steps = 60_000;
    cfg.exploration_steps = 4_000;
    cfg.eval_interval = 10_000;
    cfg.eval_episodes = 10;
    cfg.w_train = vec![1.0, 1.0, 0.0, 1.0];
    cfg.eval_task = TaskSpec::Fixed(vec![1.0, 1.0, 0.0, 1.0]);
    cfg.hp.gamma = 0.95;
    cfg.hp.alpha = 0.1;
    cfg.hp.batch_size = 128;
    cfg.hp.utd = 2;
    cfg.net.hidden = vec![32, 32];
    cfg.net.lr_psi = 1e-3;
    cfg.net.lr_pi = 3e-4;
    cfg.net.critic_value_scale = 50.0;

    let out = train(&cfg, None).unwrap();
    for row in &out.rows {
        println!("{}", row.to_csv());
    }
    let probe_obs: Vec<f32> = vec![0.5, -0.5, 0.0, 0.0];
    let heads = out.agent.prims.prims[0].heads(&probe_obs, 1);
    println!(
        "trained probe mean_action: ({:+.3},{:+.3}) std ({:.3},{:.3})",
        heads[0].mean_action()[0],
        heads[0].mean_action()[1],
        heads[0].std()[0],
        heads[0].std()[1],
    );
}
