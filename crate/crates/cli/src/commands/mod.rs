mod evaluate;
mod forecast;
mod synth;
mod train;
mod tune;

pub use evaluate::evaluate;
pub use forecast::forecast;
pub use synth::synth;
pub use train::train;
pub use tune::tune;
