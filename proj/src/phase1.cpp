#include "visloco/phase1.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

namespace visloco::phase1 {

void RolloutBuffer::allocate(int envs, int steps_per_env, int seg) {
    if (steps_per_env % seg != 0) {
        throw std::invalid_argument("RolloutBuffer: steps must be a multiple of seg_len");
    }
    num_envs = envs;
    steps = steps_per_env;
    seg_len = seg;
    auto resize_all = [&](auto& v) {
        v.assign(static_cast<std::size_t>(envs), {});
        for (auto& row : v) row.resize(static_cast<std::size_t>(steps_per_env));
    };
    resize_all(obs);
    resize_all(action);
    resize_all(log_prob);
    resize_all(value);
    resize_all(reward);
    resize_all(done);
    resize_all(reset_before);
    resize_all(bootstrap);
    resize_all(adv);
    resize_all(ret);
    seg_hidden.assign(static_cast<std::size_t>(envs), {});
    for (auto& row : seg_hidden) row.resize(static_cast<std::size_t>(steps_per_env / seg));
    tail_bootstrap.assign(static_cast<std::size_t>(envs), 0.0);
}

void gae_advantages(RolloutBuffer& buf, double gamma, double lam, bool normalize) {
    for (int e = 0; e < buf.num_envs; ++e) {
        double a = 0.0;
        for (int t = buf.steps - 1; t >= 0; --t) {
            const bool d = buf.done[e][t] != 0;
            const double v_next = d ? buf.bootstrap[e][t]
                                    : (t == buf.steps - 1 ? buf.tail_bootstrap[e]
                                                          : buf.value[e][t + 1]);
            const double delta = buf.reward[e][t] + gamma * v_next - buf.value[e][t];
            a = delta + gamma * lam * (d ? 0.0 : a);
            buf.adv[e][t] = a;
            buf.ret[e][t] = a + buf.value[e][t];
        }
    }
    if (!normalize) return;
    double sum = 0.0, sum2 = 0.0;
    const double n = static_cast<double>(buf.transition_count());
    for (int e = 0; e < buf.num_envs; ++e) {
        for (int t = 0; t < buf.steps; ++t) {
            sum += buf.adv[e][t];
            sum2 += buf.adv[e][t] * buf.adv[e][t];
        }
    }
    const double mean = sum / n;
    const double std = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
    for (int e = 0; e < buf.num_envs; ++e) {
        for (int t = 0; t < buf.steps; ++t) {
            buf.adv[e][t] = (buf.adv[e][t] - mean) / (std + 1e-8);
        }
    }
}

int curriculum_update(int col, int cols, double distance, double terrain_length,
                      double commanded_distance) {
    // promoted if they traverse more than half the terrain length; demoted if
    // they fail to travel at least half the commanded distance
    if (distance > 0.5 * terrain_length) return std::min(col + 1, cols - 1);
    if (distance < 0.5 * commanded_distance) return std::max(col - 1, 0);
    return col;
}

Trainer::Trainer(policy::Phase1Policy& policy, const EnvConfig& env_cfg,
                 const terrain::TerrainGrid& grid, const TrainerConfig& cfg)
    : policy_(policy), grid_(grid), cfg_(cfg), update_rng_(Rng(cfg.seed).derive(0x517ULL)) {
    Rng seeder(cfg.seed);
    for (int e = 0; e < cfg.num_envs; ++e) {
        envs_.push_back(std::make_unique<Env>(env_cfg, seeder.derive(e).seed()));
        env_rngs_.push_back(seeder.derive(0x9000 + e));
        const int row = e % grid.rows();
        rows_.push_back(row);
        cols_.push_back(0);
        envs_.back()->set_cell(&grid_.at(row, 0), grid_.row_kinds[static_cast<std::size_t>(row)],
                               row, 0);
        envs_.back()->reset();
        hidden_.push_back(Vec::Zero(policy.hidden_dim()));
        fresh_.push_back(1);
    }
    buf_.allocate(cfg.num_envs, cfg.steps_per_env, cfg.ppo.seg_len);
    nn::AdamConfig ac;
    ac.lr = cfg.ppo.lr;
    adam_.reset(ac, nn::total_size(policy.params()));
}

void Trainer::collect_env(int e, IterStats& stats) {
    Env& env = *envs_[static_cast<std::size_t>(e)];
    Rng& rng = env_rngs_[static_cast<std::size_t>(e)];
    Vec& h = hidden_[static_cast<std::size_t>(e)];
    for (int t = 0; t < buf_.steps; ++t) {
        const bool reset_now = fresh_[static_cast<std::size_t>(e)] != 0;
        if (reset_now) h.setZero();
        if (t % buf_.seg_len == 0) buf_.seg_hidden[e][t / buf_.seg_len] = h;
        buf_.reset_before[e][t] = reset_now ? 1 : 0;
        fresh_[static_cast<std::size_t>(e)] = 0;

        policy::PolicyObs o = env.observe_teacher();
        const policy::ActOut out = policy_.act(o, h, &rng);
        const StepResult res = env.step(out.action);

        const double vscale = cfg_.ppo.value_scale();
        buf_.obs[e][t] = std::move(o);
        buf_.action[e][t] = out.action;
        buf_.log_prob[e][t] = out.log_prob;
        buf_.value[e][t] = out.value * vscale;
        buf_.reward[e][t] = res.reward.total;
        buf_.done[e][t] = res.done ? 1 : 0;
        buf_.bootstrap[e][t] = 0.0;

        if (res.done) {
            if (!res.terminal) {
                // time-limit bootstrap from the pre-reset state
                Vec h_copy = h;
                policy::PolicyObs next = env.observe_teacher();
                buf_.bootstrap[e][t] = policy_.act(next, h_copy, nullptr).value * vscale;
            }
            stats.episodes += 1;
            stats.episode_return += env.episode_return();
            stats.episode_length += env.episode_steps();
            stats.episode_distance += env.episode_distance();
            if (cfg_.curriculum) {
                const int row = rows_[static_cast<std::size_t>(e)];
                const int col = cols_[static_cast<std::size_t>(e)];
                cols_[static_cast<std::size_t>(e)] = curriculum_update(
                    col, grid_.cols, env.episode_distance(), grid_.at(row, col).length(),
                    env.commanded_distance());
            }
            const int row = rows_[static_cast<std::size_t>(e)];
            const int col = cols_[static_cast<std::size_t>(e)];
            env.set_cell(&grid_.at(row, col), grid_.row_kinds[static_cast<std::size_t>(row)], row,
                         col);
            env.reset();
            fresh_[static_cast<std::size_t>(e)] = 1;
        }
    }
    // rollout-end bootstrap
    Vec h_copy = fresh_[static_cast<std::size_t>(e)] != 0 ? Vec::Zero(policy_.hidden_dim()).eval()
                                                           : h;
    policy::PolicyObs next = env.observe_teacher();
    buf_.tail_bootstrap[e] = policy_.act(next, h_copy, nullptr).value * cfg_.ppo.value_scale();
}

IterStats Trainer::iterate() {
    IterStats stats;
    const int threads = std::max(1, cfg_.threads);
    if (threads == 1) {
        for (int e = 0; e < cfg_.num_envs; ++e) collect_env(e, stats);
    } else {
        std::vector<IterStats> partial(static_cast<std::size_t>(threads));
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([this, w, threads, &partial]() {
                for (int e = w; e < cfg_.num_envs; e += threads) {
                    collect_env(e, partial[static_cast<std::size_t>(w)]);
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& p : partial) {
            stats.episodes += p.episodes;
            stats.episode_return += p.episode_return;
            stats.episode_length += p.episode_length;
            stats.episode_distance += p.episode_distance;
        }
    }
    total_env_steps_ += buf_.transition_count();
    stats.env_steps = total_env_steps_;
    double reward_sum = 0.0;
    for (int e = 0; e < buf_.num_envs; ++e) {
        reward_sum += std::accumulate(buf_.reward[e].begin(), buf_.reward[e].end(), 0.0);
    }
    stats.mean_step_reward = reward_sum / static_cast<double>(buf_.transition_count());
    if (stats.episodes > 0) {
        stats.episode_return /= stats.episodes;
        stats.episode_length /= stats.episodes;
        stats.episode_distance /= stats.episodes;
    }
    stats.mean_col =
        std::accumulate(cols_.begin(), cols_.end(), 0.0) / static_cast<double>(cols_.size());

    gae_advantages(buf_, cfg_.ppo.gamma, cfg_.ppo.lam);
    update(stats);
    return stats;
}

void Trainer::update(IterStats& stats) {
    const auto views = policy_.params();
    const int segs_per_env = buf_.segments_per_env();
    std::vector<std::pair<int, int>> segments;  // (env, seg)
    for (int e = 0; e < buf_.num_envs; ++e) {
        for (int s = 0; s < segs_per_env; ++s) segments.emplace_back(e, s);
    }

    const Vec theta_backup = nn::flatten_values(views);
    double kl_accum = 0.0;
    long kl_count = 0;
    std::vector<Vec> dmean(static_cast<std::size_t>(buf_.seg_len));
    std::vector<double> dvalue(static_cast<std::size_t>(buf_.seg_len));

    for (int epoch = 0; epoch < cfg_.ppo.epochs; ++epoch) {
        // deterministic shuffle
        for (int i = static_cast<int>(segments.size()) - 1; i > 0; --i) {
            std::swap(segments[static_cast<std::size_t>(i)],
                      segments[static_cast<std::size_t>(update_rng_.uniform_int(0, i))]);
        }
        const int per_batch =
            static_cast<int>(segments.size() + cfg_.ppo.minibatches - 1) / cfg_.ppo.minibatches;
        double epoch_kl = 0.0;
        long epoch_kl_n = 0;
        for (int mb = 0; mb < cfg_.ppo.minibatches; ++mb) {
            const int lo = mb * per_batch;
            const int hi = std::min<int>((mb + 1) * per_batch, static_cast<int>(segments.size()));
            if (lo >= hi) continue;
            nn::zero_grads(views);
            const double inv_n = 1.0 / static_cast<double>((hi - lo) * buf_.seg_len);
            double batch_ploss = 0.0, batch_vloss = 0.0;
            bool finite = true;
            for (int si = lo; si < hi && finite; ++si) {
                const auto [e, s] = segments[static_cast<std::size_t>(si)];
                const int t0 = s * buf_.seg_len;
                policy_.begin_segment(buf_.seg_hidden[e][s], buf_.seg_len);
                for (int k = 0; k < buf_.seg_len; ++k) {
                    const int t = t0 + k;
                    Vec mean;
                    double value = 0.0;
                    policy_.forward_step(k, buf_.obs[e][t], buf_.reset_before[e][t] != 0, mean,
                                         value);
                    const Vec& a = buf_.action[e][t];
                    const double lp_new = policy::gaussian_log_prob(mean, policy_.log_std, a);
                    const double ratio = std::exp(lp_new - buf_.log_prob[e][t]);
                    const double adv = buf_.adv[e][t];
                    const double unclipped = ratio * adv;
                    const double clipped =
                        std::clamp(ratio, 1.0 - cfg_.ppo.clip, 1.0 + cfg_.ppo.clip) * adv;
                    const bool active = unclipped <= clipped;  // min picks the unclipped branch
                    batch_ploss += -std::min(unclipped, clipped);
                    const double verr = value - buf_.ret[e][t] / cfg_.ppo.value_scale();
                    batch_vloss += 0.5 * verr * verr;
                    if (!std::isfinite(lp_new) || !std::isfinite(verr)) {
                        finite = false;
                        break;
                    }

                    Vec dm = Vec::Zero(mean.size());
                    if (active) {
                        for (Eigen::Index j = 0; j < mean.size(); ++j) {
                            const double sigma = std::exp(policy_.log_std[j]);
                            const double zscore = (a[j] - mean[j]) / (sigma * sigma);
                            dm[j] = -adv * ratio * zscore * inv_n;
                            const double dlp_dls =
                                ((a[j] - mean[j]) * (a[j] - mean[j]) / (sigma * sigma) - 1.0);
                            policy_.glog_std[j] += -adv * ratio * dlp_dls * inv_n;
                        }
                    }
                    // entropy bonus depends only on log_std
                    for (Eigen::Index j = 0; j < policy_.log_std.size(); ++j) {
                        policy_.glog_std[j] += -cfg_.ppo.entropy_coef * inv_n;
                    }
                    dmean[static_cast<std::size_t>(k)] = std::move(dm);
                    dvalue[static_cast<std::size_t>(k)] =
                        cfg_.ppo.value_coef * verr * inv_n;
                    epoch_kl += buf_.log_prob[e][t] - lp_new;
                    ++epoch_kl_n;
                }
                if (finite) policy_.backward_segment(dmean, dvalue);
            }
            if (!finite) {
                stats.update_skipped = true;
                nn::scatter_values(views, theta_backup);
                return;
            }
            // gradient norm clip
            if (cfg_.ppo.max_grad_norm > 0.0) {
                const Vec g = nn::flatten_grads(views);
                const double norm = g.norm();
                if (norm > cfg_.ppo.max_grad_norm) {
                    const double scale = cfg_.ppo.max_grad_norm / norm;
                    Eigen::Index off = 0;
                    for (const auto& v : views) {
                        Eigen::Map<Vec>(v.grad, v.size) *= scale;
                        off += v.size;
                    }
                }
            }
            adam_.update(views);
            stats.policy_loss += batch_ploss * inv_n;
            stats.value_loss += batch_vloss * inv_n;
        }
        stats.epochs_run = epoch + 1;
        kl_accum += epoch_kl;
        kl_count += epoch_kl_n;
        if (epoch_kl_n > 0 && epoch_kl / static_cast<double>(epoch_kl_n) > cfg_.ppo.kl_limit) {
            break;  // KL guard
        }
    }
    stats.approx_kl = kl_count > 0 ? kl_accum / static_cast<double>(kl_count) : 0.0;
    stats.entropy = policy::gaussian_entropy(policy_.log_std);
    const int batches_run = stats.epochs_run * cfg_.ppo.minibatches;
    if (batches_run > 0) {
        stats.policy_loss /= batches_run;
        stats.value_loss /= batches_run;
    }
}

void Trainer::write_metrics_header(std::ostream& os) {
    os << "iter,env_steps,episodes,step_reward,episode_return,episode_length,episode_distance,"
          "mean_col,policy_loss,value_loss,entropy,approx_kl,epochs_run,update_skipped\n";
}

void Trainer::write_metrics_row(std::ostream& os, int iter, const IterStats& s) {
    os << iter << ',' << s.env_steps << ',' << s.episodes << ',' << s.mean_step_reward << ','
       << s.episode_return << ',' << s.episode_length << ',' << s.episode_distance << ','
       << s.mean_col << ',' << s.policy_loss << ',' << s.value_loss << ',' << s.entropy << ','
       << s.approx_kl << ',' << s.epochs_run << ',' << (s.update_skipped ? 1 : 0) << "\n";
}

}  // namespace visloco::phase1
