//! Stateless operators: the softmax family, entropy, lookahead and minimax
//! Bellman operators, the matrix-game LP, best-response MDP solving and the
//! ergodicity diagnostic.

pub mod bellman;
pub mod lp;
pub mod markov;
pub mod softmax;

pub use bellman::{
    bellman_t, best_response_value, expected_utility, minimax_bellman, minimax_value_iteration,
    policy_evaluation, BestResponse, MinimaxFixedPoint,
};
pub use lp::{matrix_game_value, GameValue};
pub use markov::{induced_chain, stationary_distribution};
pub use softmax::{
    entropy, exploration_bound, softmax, softmax_explore, DynamicsVariant, ExplorationBound,
    SoftmaxParams,
};
