#ifndef SEMOFF_SEMANTICS_HPP
#define SEMOFF_SEMANTICS_HPP

#include "semoff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace semoff::semantics {

/// Tabulated semantic similarity eps(k, snr_db). Rows are k, columns are SNR nodes.
/// Immutable once constructed; the constructor enforces the monotonicity invariants.
class AccuracyTable {
public:
    AccuracyTable(std::vector<int> k_values, std::vector<double> snr_grid_db, std::vector<std::vector<double>> eps)
        : k_values_(std::move(k_values)), snr_db_(std::move(snr_grid_db)), eps_(std::move(eps))
    {
        check();
    }

    const std::vector<int>& k_values() const { return k_values_; }
    const std::vector<double>& snr_grid_db() const { return snr_db_; }
    double at(std::size_t k_index, std::size_t snr_index) const { return eps_[k_index][snr_index]; }

    bool has_k(int k) const { return std::find(k_values_.begin(), k_values_.end(), k) != k_values_.end(); }

    std::size_t k_index(int k) const
    {
        auto it = std::find(k_values_.begin(), k_values_.end(), k);
        if (it == k_values_.end())
            throw ConfigError("accuracy table has no row for k=" + std::to_string(k));
        return static_cast<std::size_t>(it - k_values_.begin());
    }

private:
    void check() const
    {
        if (k_values_.empty() || snr_db_.empty()) throw ConfigError("accuracy table is empty");
        if (eps_.size() != k_values_.size()) throw ConfigError("accuracy table: row count does not match k list");
        if (!std::is_sorted(k_values_.begin(), k_values_.end()) ||
            std::adjacent_find(k_values_.begin(), k_values_.end()) != k_values_.end())
            throw ConfigError("accuracy table: k values must be strictly increasing");
        for (std::size_t i = 1; i < snr_db_.size(); ++i)
            if (!(snr_db_[i] > snr_db_[i - 1])) throw ConfigError("accuracy table: SNR grid must be strictly increasing");
        for (std::size_t a = 0; a < eps_.size(); ++a) {
            if (eps_[a].size() != snr_db_.size()) throw ConfigError("accuracy table: ragged row");
            for (std::size_t s = 0; s < snr_db_.size(); ++s) {
                const double e = eps_[a][s];
                if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("accuracy table: eps outside [0,1]");
                if (s > 0 && e < eps_[a][s - 1])
                    throw ConfigError("accuracy table: eps decreases with SNR at k=" + std::to_string(k_values_[a]));
                if (a > 0 && e < eps_[a - 1][s])
                    throw ConfigError("accuracy table: eps decreases with k at snr_db=" + std::to_string(snr_db_[s]));
            }
        }
    }

    std::vector<int> k_values_;
    std::vector<double> snr_db_;
    std::vector<std::vector<double>> eps_;
};

/// Logistic family used to build the default table:
/// eps = (1 - 0.5/k) / (1 + exp(-0.3 (snr_db - (12 - 0.4 k)))).
inline double logistic_similarity(int k, double snr_db)
{
    const double eps_max = 1.0 - 0.5 / k;
    const double mid = 12.0 - 0.4 * k;
    return eps_max / (1.0 + std::exp(-0.3 * (snr_db - mid)));
}

inline AccuracyTable default_table()
{
    std::vector<int> ks{5, 10, 15, 20};
    std::vector<double> grid;
    for (int s = -10; s <= 25; s += 5) grid.push_back(s);
    std::vector<std::vector<double>> eps;
    for (int k : ks) {
        std::vector<double> row;
        for (double s : grid) row.push_back(logistic_similarity(k, s));
        eps.push_back(std::move(row));
    }
    return AccuracyTable(ks, grid, eps);
}

/// Bilinear interpolation in (k, 10 log10 gamma), clamped to the grid edges.
/// gamma = 0 maps to the lowest grid point. `k` must be a tabulated row, so the
/// k direction degenerates to row selection.
inline double similarity(const AccuracyTable& table, int k, double gamma)
{
    if (gamma < 0 || std::isnan(gamma)) throw std::domain_error("similarity: negative SNR");
    const auto row = table.k_index(k);
    const auto& grid = table.snr_grid_db();
    if (gamma == 0.0) return table.at(row, 0);
    const double db = 10.0 * std::log10(gamma);
    if (db <= grid.front()) return table.at(row, 0);
    if (db >= grid.back()) return table.at(row, grid.size() - 1);
    auto hi = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), db) - grid.begin());
    const auto lo = hi - 1;
    if (db == grid[lo]) return table.at(row, lo);
    const double w = (db - grid[lo]) / (grid[hi] - grid[lo]);
    return table.at(row, lo) + w * (table.at(row, hi) - table.at(row, lo));
}

struct SemanticSourceStats {
    double avg_semantic_units = 30.0; // A^s per sentence
    double avg_words = 20.0;          // A^w per sentence
    int symbols_per_word = 15;        // k
};

/// Semantic rate Gamma = W A^s eps / (A^w k), semantic units per second.
inline double semantic_rate(const SemanticSourceStats& stats, double bandwidth_hz, double eps)
{
    return bandwidth_hz * stats.avg_semantic_units * eps / (stats.avg_words * stats.symbols_per_word);
}

/// Reads a `k,snr_db,eps` CSV. Every (k, snr) pair of the implied grid must be present once.
inline AccuracyTable load_table_csv(std::istream& in, const std::string& origin = "<stream>")
{
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(origin + ": empty accuracy table file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "k,snr_db,eps") throw ConfigError(origin + ": header must be 'k,snr_db,eps'");
    std::map<int, std::map<double, double>> cells;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected three columns");
        try {
            std::size_t pa = 0, pb = 0, pc = 0;
            int k = std::stoi(a, &pa);
            double s = std::stod(b, &pb);
            double e = std::stod(c, &pc);
            if (pa != a.size() || pb != b.size() || pc != c.size()) throw std::invalid_argument(line);
            if (!cells[k].emplace(s, e).second)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate grid node");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
        }
    }
    if (cells.empty()) throw ConfigError(origin + ": no rows");
    std::vector<double> grid;
    for (const auto& [s, _] : cells.begin()->second) grid.push_back(s);
    std::vector<int> ks;
    std::vector<std::vector<double>> eps;
    for (const auto& [k, row] : cells) {
        if (row.size() != grid.size()) throw ConfigError(origin + ": k=" + std::to_string(k) + " has a different SNR grid");
        std::vector<double> vals;
        std::size_t i = 0;
        for (const auto& [s, e] : row) {
            if (s != grid[i++]) throw ConfigError(origin + ": k=" + std::to_string(k) + " has a different SNR grid");
            vals.push_back(e);
        }
        ks.push_back(k);
        eps.push_back(std::move(vals));
    }
    return AccuracyTable(ks, grid, eps);
}

inline AccuracyTable load_table_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open accuracy table '" + path + "'");
    return load_table_csv(in, path);
}

inline void write_table_csv(std::ostream& out, const AccuracyTable& t)
{
    out << "k,snr_db,eps\n" << std::setprecision(17);
    for (std::size_t a = 0; a < t.k_values().size(); ++a)
        for (std::size_t s = 0; s < t.snr_grid_db().size(); ++s)
            out << t.k_values()[a] << ',' << t.snr_grid_db()[s] << ',' << t.at(a, s) << '\n';
}

} // namespace semoff::semantics

#endif // SEMOFF_SEMANTICS_HPP
