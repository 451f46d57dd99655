#include "sslgmm/dataset.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "sslgmm/csv.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/rng.hpp"

namespace sslgmm {

namespace {

int draw_label(CounterRng& rng, double rho) {
    if (rho >= 1.0) return 1;
    if (rho <= 0.0) return -1;
    return rng.uniform() < rho ? 1 : -1;
}

void fill_rows(RowMatrix& x, std::vector<int>& y, const ModelParams& params, const std::vector<double>& w0,
               std::uint64_t seed, std::uint64_t label_stream, std::uint64_t noise_stream) {
    const int n = params.n_dim;
    const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
    const double sigma = std::sqrt(params.sigma2);
    CounterRng labels(seed, label_stream);
    for (int r = 0; r < x.rows(); ++r) {
        y[r] = draw_label(labels, params.rho);
        CounterRng noise(seed, noise_stream, std::uint64_t(r));
        auto row = x.row(r);
        for (int i = 0; i < n; ++i) row[i] = y[r] * w0[i] * inv_sqrt_n + sigma * noise.normal();
    }
}

}  // namespace

Dataset generate_dataset(const ModelParams& params, std::uint64_t seed) {
    params.validate();
    const int n = params.n_dim;
    const int m_l = params.labeled_count();
    const int m_u = params.unlabeled_count();

    Dataset d;
    d.n_dim = n;
    d.seed = seed;
    d.alpha_l_effective = double(m_l) / n;
    d.alpha_u_effective = double(m_u) / n;

    d.w0.resize(n);
    CounterRng teacher(seed, streams::teacher);
    const double w_scale = 1.0 / std::sqrt(params.lambda0);
    for (auto& w : d.w0) w = w_scale * teacher.normal();

    d.x_labeled = RowMatrix(m_l, n);
    d.y_labeled.resize(m_l);
    fill_rows(d.x_labeled, d.y_labeled, params, d.w0, seed, streams::labeled_labels, streams::labeled_noise);

    d.x_unlabeled = RowMatrix(m_u, n);
    d.y_hidden.resize(m_u);
    fill_rows(d.x_unlabeled, d.y_hidden, params, d.w0, seed, streams::unlabeled_labels, streams::unlabeled_noise);
    return d;
}

double empirical_signal_variance(const Dataset& data) {
    if (data.w0.empty()) throw DegenerateInput("dataset has no teacher weights");
    double s = 0.0;
    for (double w : data.w0) s += w * w;
    return s / double(data.w0.size());
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool reveal_hidden) {
    std::vector<std::string> cols{"row_type", "label"};
    for (int i = 0; i < data.n_dim; ++i) cols.push_back("feature_" + std::to_string(i));
    CsvWriter csv(out, "dataset/1", cols);

    csv.cell("W0").empty();
    for (double w : data.w0) csv.cell(w);
    csv.end_row();
    for (int r = 0; r < data.x_labeled.rows(); ++r) {
        csv.cell("L").cell(data.y_labeled[r]);
        for (double x : data.x_labeled.row(r)) csv.cell(x);
        csv.end_row();
    }
    for (int r = 0; r < data.x_unlabeled.rows(); ++r) {
        csv.cell("U");
        if (reveal_hidden) {
            csv.cell(data.y_hidden[r]);
        } else {
            csv.empty();
        }
        for (double x : data.x_unlabeled.row(r)) csv.cell(x);
        csv.end_row();
    }
}

}  // namespace sslgmm
