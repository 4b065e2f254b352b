//! VM migration planning on capacitated networks.
//!
//! The planner maximises the total net transmission rate (allocated bandwidth
//! minus page dirty rate) of concurrent live migrations, using a primal-dual
//! approximation of maximum multicommodity flow. Exact small-instance oracles,
//! two baseline planners and an event-driven simulator sit alongside it.

pub mod baselines;
pub mod fpta;
pub mod gen;
pub mod maxflow;
pub mod model;
pub mod oracle;
pub mod request;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod units;
