pub mod blocks;
pub mod clt;
pub mod dist;
pub mod phi;
pub mod simulate;
pub mod verify;
