//! Survey-to-seating pipeline for cluster-style classrooms.
//!
//! The stages, in order:
//!
//! 1. [`survey`] — ingest teacher survey answers and map them to crisp scores.
//! 2. [`fis`] — Mamdani inference turning the three scores into the
//!    coefficients `D` (how easily distracted) and `d` (how distracting).
//! 3. [`fcm`] — fuzzy c-means over the (D, d) plane with three sector seeds.
//! 4. [`classify`] — split each cluster into High/Low association, yielding
//!    six category labels.
//! 5. [`assign`] — build and rotate distraction-minimizing group
//!    arrangements via greedy construction and swap-based local search.
//! 6. [`evaluate`] — compare arrangements by co-grouped pair similarity.
//!
//! Everything is deterministic: the only randomness lives in arrangement
//! rotation and flows from a single recorded seed.

pub mod assign;
pub mod classify;
pub mod evaluate;
pub mod fcm;
pub mod fis;
pub mod survey;
