use ef_env::{ArmWorld, EnvConfig, Task};
fn main() {
    let mut cfg = EnvConfig::default();
    cfg.task = Task::ToolReach;
    cfg.frame_size = 64;
    let mut env = ArmWorld::new(cfg, 3);
    let obs = env.reset_seeded(12);
    let f = &obs.frame;
    let img = image::RgbImage::from_raw(f.w as u32, f.h as u32, f.data.clone()).unwrap();
    let up = image::imageops::resize(&img, 256, 256, image::imageops::FilterType::Nearest);
    up.save("/tmp/frame_check.png").unwrap();
    let mut env2 = ArmWorld::new(EnvConfig::default(), 5);
    let obs2 = env2.reset_seeded(8);
    let f2 = &obs2.frame;
    let img2 = image::RgbImage::from_raw(f2.w as u32, f2.h as u32, f2.data.clone()).unwrap();
    let up2 = image::imageops::resize(&img2, 256, 256, image::imageops::FilterType::Nearest);
    up2.save("/tmp/frame_check2.png").unwrap();
    println!("saved");
}
