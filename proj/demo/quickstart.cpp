// Fits the Bayesian Lasso to one simulated data set, prints the posterior
// summary and the Bayes-factor verdicts, then checks it against the Gibbs
// sampler.

#include <cstdio>

#include <vblasso/vblasso.hpp>

int main() {
    using namespace vblasso;
    const GeneratedData gen = generate_exercise(exercise2(3, 1, 2024), 0);
    const LassoPriors priors;

    const VariationalState s = fit(gen.train, priors);
    const SelectionReport bf = select(s, Criterion::bf);
    GibbsOptions mcmc;
    mcmc.seed = 7;
    const GibbsChain chain = gibbs_fit(gen.train, priors, mcmc);
    const ChainSummary mc = chain_summary(chain);
    const Eigen::VectorXd sd = s.beta_sd();

    std::printf("converged after %d iterations, ELBO %.4f\n", s.iteration, s.elbo_trace.back());
    std::printf("%4s %8s %8s %8s %8s %8s  %s\n", "j", "truth", "vb mean", "vb sd", "mc mean", "mc sd", "BF");
    for (Eigen::Index j = 0; j < s.p(); ++j) {
        std::printf("%4ld %8.3f %8.3f %8.3f %8.3f %8.3f  %s\n", static_cast<long>(j + 1), gen.beta(j), s.m_beta(j),
                    sd(j), mc.mean(j), mc.sd(j), bf.entries[static_cast<std::size_t>(j)].kept() ? "keep" : "exclude");
    }
    std::printf("phi    vb %.4f  mc %.4f\n", s.phi_mean(), mc.mean(s.p()));
    std::printf("lambda vb %.4f  mc %.4f\n", s.lambda_mean(), mc.mean(s.p() + 1));
    return 0;
}
