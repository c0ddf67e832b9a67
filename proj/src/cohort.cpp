#include "ggr/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ggr/csv.hpp"
#include "ggr/rng.hpp"
#include "ggr/texture.hpp"

namespace ggr {

namespace {

void write_i16_le(std::ostream& out, int16_t v) {
    const auto u = static_cast<uint16_t>(v);
    char b[2] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff)};
    out.write(b, 2);
}

int16_t read_i16_le(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<int16_t>(static_cast<uint16_t>(b[0]) | (static_cast<uint16_t>(b[1]) << 8));
}

std::string read_header_line(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing header: " + path.string());
    return line;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

size_t TumorMask::nonzero_count() const {
    size_t n = 0;
    for (uint8_t v : voxels)
        if (v) ++n;
    return n;
}

bool GeneExpressionTable::is_missing(int patient, int gene) const {
    return std::isnan(values(patient, gene));
}

int GeneExpressionTable::patient_index(const std::string& id) const {
    for (size_t i = 0; i < patient_ids.size(); ++i)
        if (patient_ids[i] == id) return static_cast<int>(i);
    return -1;
}

Matrix CohortDataset::gene_matrix() const {
    Matrix m(static_cast<int>(records.size()), static_cast<int>(gene_names.size()));
    for (size_t i = 0; i < records.size(); ++i) {
        if (!records[i].genes) throw std::runtime_error("gene_matrix: record without genes: " + records[i].id);
        const auto& g = *records[i].genes;
        if (g.size() != gene_names.size()) throw std::runtime_error("gene_matrix: length mismatch");
        for (size_t j = 0; j < g.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = g[j];
    }
    return m;
}

std::vector<int> CohortDataset::labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.recurrence) throw std::runtime_error("labels: record without recurrence: " + r.id);
        out.push_back(*r.recurrence);
    }
    return out;
}

CtVolume load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open volume: " + path.string());
    std::istringstream hdr(read_header_line(in, path));
    std::string magic, version;
    long long s = 0, r = 0, c = 0;
    Spacing sp;
    hdr >> magic >> version >> s >> r >> c >> sp.z >> sp.y >> sp.x;
    if (hdr.fail() || magic != "GGRVOL" || version != "v1")
        throw std::runtime_error("malformed GGRVOL header: " + path.string());
    if (s <= 0 || r <= 0 || c <= 0)
        throw std::runtime_error("GGRVOL dims must be positive: " + path.string());
    if (!std::isfinite(sp.z) || !std::isfinite(sp.y) || !std::isfinite(sp.x))
        throw std::runtime_error("GGRVOL non-finite spacing: " + path.string());
    CtVolume vol;
    vol.spacing = sp;
    vol.voxels = Grid3<int16_t>(static_cast<int>(s), static_cast<int>(r), static_cast<int>(c));
    for (int i = 0; i < static_cast<int>(vol.voxels.size()); ++i) {
        vol.voxels.data()[i] = read_i16_le(in);
        if (!in) throw std::runtime_error("GGRVOL payload shorter than header dims: " + path.string());
    }
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("GGRVOL payload longer than header dims: " + path.string());
    return vol;
}

void save_volume(const CtVolume& vol, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write volume: " + path.string());
    out << "GGRVOL v1 " << vol.voxels.slices() << ' ' << vol.voxels.rows() << ' '
        << vol.voxels.cols() << ' ' << format_double(vol.spacing.z) << ' '
        << format_double(vol.spacing.y) << ' ' << format_double(vol.spacing.x) << '\n';
    for (size_t i = 0; i < vol.voxels.size(); ++i) write_i16_le(out, vol.voxels.data()[i]);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

TumorMask load_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mask: " + path.string());
    std::istringstream hdr(read_header_line(in, path));
    std::string magic, version;
    long long s = 0, r = 0, c = 0;
    hdr >> magic >> version >> s >> r >> c;
    if (hdr.fail() || magic != "GGRMSK" || version != "v1")
        throw std::runtime_error("malformed GGRMSK header: " + path.string());
    if (s <= 0 || r <= 0 || c <= 0)
        throw std::runtime_error("GGRMSK dims must be positive: " + path.string());
    TumorMask mask;
    mask.voxels = Grid3<uint8_t>(static_cast<int>(s), static_cast<int>(r), static_cast<int>(c));
    in.read(reinterpret_cast<char*>(mask.voxels.data()),
            static_cast<std::streamsize>(mask.voxels.size()));
    if (static_cast<size_t>(in.gcount()) != mask.voxels.size())
        throw std::runtime_error("GGRMSK payload shorter than header dims: " + path.string());
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("GGRMSK payload longer than header dims: " + path.string());
    for (uint8_t v : mask.voxels)
        if (v > 1) throw std::runtime_error("GGRMSK values must be 0 or 1: " + path.string());
    return mask;
}

void save_mask(const TumorMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write mask: " + path.string());
    out << "GGRMSK v1 " << mask.voxels.slices() << ' ' << mask.voxels.rows() << ' '
        << mask.voxels.cols() << '\n';
    out.write(reinterpret_cast<const char*>(mask.voxels.data()),
              static_cast<std::streamsize>(mask.voxels.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

GeneExpressionTable load_gene_table(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 2 || csv.header[0] != "patient_id")
        throw std::runtime_error("gene CSV must start with a patient_id column: " + path.string());
    GeneExpressionTable table;
    table.gene_names.assign(csv.header.begin() + 1, csv.header.end());
    {
        std::set<std::string> seen;
        for (const auto& g : table.gene_names)
            if (!seen.insert(g).second)
                throw std::runtime_error("duplicate gene name '" + g + "' in " + path.string());
    }
    const int n_genes = static_cast<int>(table.gene_names.size());
    table.values = Matrix(static_cast<int>(csv.rows.size()), n_genes);
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        if (static_cast<int>(row.size()) != n_genes + 1)
            throw std::runtime_error("ragged gene CSV row " + std::to_string(r + 2) + " in " +
                                     path.string());
        table.patient_ids.push_back(row[0]);
        for (int g = 0; g < n_genes; ++g) {
            const std::string& cell = row[g + 1];
            if (cell.empty() || cell == "NA" || cell == "N/A") {
                table.values(static_cast<int>(r), g) = std::nan("");
                continue;
            }
            const double v = parse_double(cell, "gene CSV " + path.string());
            if (!std::isfinite(v) || v < 0.0)
                throw std::runtime_error("gene value must be finite and non-negative, got '" + cell +
                                         "' in " + path.string());
            table.values(static_cast<int>(r), g) = v;
        }
    }
    return table;
}

void save_gene_table(const GeneExpressionTable& table, const std::filesystem::path& path) {
    CsvTable csv;
    csv.header.push_back("patient_id");
    for (const auto& g : table.gene_names) csv.header.push_back(g);
    for (size_t p = 0; p < table.patient_ids.size(); ++p) {
        std::vector<std::string> row{table.patient_ids[p]};
        for (size_t g = 0; g < table.gene_names.size(); ++g) {
            const double v = table.values(static_cast<int>(p), static_cast<int>(g));
            row.push_back(std::isnan(v) ? "NA" : format_double(v));
        }
        csv.rows.push_back(std::move(row));
    }
    write_csv(csv, path);
}

namespace {

// Core screen: records must already carry gene vectors of |names| length.
CohortDataset screen_core(std::vector<PatientRecord> retained, std::vector<std::string> names) {
    if (retained.empty()) throw std::runtime_error("screen_cohort: empty cohort after screening");
    const int n_genes = static_cast<int>(names.size());
    std::vector<char> keep(n_genes, 1);
    for (const auto& rec : retained)
        for (int g = 0; g < n_genes; ++g)
            if (keep[g] && std::isnan((*rec.genes)[g])) keep[g] = 0;

    CohortDataset out;
    for (int g = 0; g < n_genes; ++g)
        if (keep[g]) out.gene_names.push_back(names[g]);
    for (auto& rec : retained) {
        std::vector<double> gv;
        gv.reserve(out.gene_names.size());
        for (int g = 0; g < n_genes; ++g)
            if (keep[g]) gv.push_back((*rec.genes)[g]);
        rec.genes = std::move(gv);
        out.records.push_back(std::move(rec));
    }
    out.provenance = "screened";
    return out;
}

}  // namespace

CohortDataset screen_cohort(std::vector<PatientRecord> records, const GeneExpressionTable& genes) {
    // Retain patients with a nonempty mask, a recurrence label, and a gene
    // row; the table is the gene source and overwrites any attached vector.
    std::vector<PatientRecord> retained;
    for (auto& rec : records) {
        if (rec.mask.voxels.empty() || rec.mask.nonzero_count() == 0) continue;
        if (!rec.recurrence) continue;
        const int row = genes.patient_index(rec.id);
        if (row < 0) continue;
        std::vector<double> gv(genes.gene_names.size());
        for (size_t g = 0; g < gv.size(); ++g) gv[g] = genes.values(row, static_cast<int>(g));
        rec.genes = std::move(gv);
        retained.push_back(std::move(rec));
    }
    return screen_core(std::move(retained), genes.gene_names);
}

// Re-screen a dataset in place, using the gene vectors attached to records.
CohortDataset screen_cohort(CohortDataset cohort) {
    std::vector<PatientRecord> retained;
    for (auto& rec : cohort.records) {
        if (rec.mask.voxels.empty() || rec.mask.nonzero_count() == 0) continue;
        if (!rec.recurrence || !rec.genes) continue;
        if (rec.genes->size() != cohort.gene_names.size())
            throw std::runtime_error("screen_cohort: gene vector length mismatch for " + rec.id);
        retained.push_back(std::move(rec));
    }
    return screen_core(std::move(retained), cohort.gene_names);
}

namespace {

struct SynthModel {
    std::vector<double> w;            // +-1 label weights, one per latent
    std::vector<double> gene_load;    // informative-gene loading, first latent_dim genes
    std::vector<double> gene_base;    // intercept per gene
    std::vector<double> gene_scale;   // FPKM-like scale per gene
    std::vector<double> u_count, u_amp, u_radius;  // texture directions
    Matrix deep_load;                 // n_deep x latent_dim
};

SynthModel make_model(const SyntheticSpec& spec, uint64_t seed) {
    Rng rng(Rng::mix(seed, 1));
    SynthModel m;
    const int L = spec.latent_dim;
    m.w.resize(L);
    for (int j = 0; j < L; ++j) m.w[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    m.gene_load.resize(L);
    for (int j = 0; j < L; ++j)
        m.gene_load[j] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(2.0, 3.0);
    m.gene_base.resize(spec.n_genes);
    m.gene_scale.resize(spec.n_genes);
    for (int g = 0; g < spec.n_genes; ++g) {
        m.gene_base[g] = rng.uniform(-1.0, 1.0);
        m.gene_scale[g] = std::exp(rng.uniform(std::log(10.0), std::log(1000.0)));
    }
    auto unit_vec = [&rng, L]() {
        std::vector<double> v(L);
        double n2 = 0.0;
        for (double& x : v) {
            x = rng.normal();
            n2 += x * x;
        }
        const double n = std::sqrt(n2);
        for (double& x : v) x /= (n > 0 ? n : 1.0);
        return v;
    };
    m.u_count = unit_vec();
    m.u_amp = unit_vec();
    m.u_radius = unit_vec();
    m.deep_load = Matrix(spec.n_deep, L);
    const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(L));
    for (int d = 0; d < spec.n_deep; ++d)
        for (int j = 0; j < L; ++j) m.deep_load(d, j) = rng.normal() * inv_sqrt_l;
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void validate_spec(const SyntheticSpec& spec) {
    if (spec.n_patients < 20) throw std::invalid_argument("synthetic spec: n_patients must be >= 20");
    if (spec.latent_dim < 1 || spec.latent_dim > spec.n_genes)
        throw std::invalid_argument("synthetic spec: need 1 <= latent_dim <= n_genes");
    if (spec.dim_slices < 3 || spec.dim_rows < 16 || spec.dim_cols < 16)
        throw std::invalid_argument("synthetic spec: dims too small (need >= 3x16x16)");
    if (spec.n_deep < 1) throw std::invalid_argument("synthetic spec: n_deep must be >= 1");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.signal_strength))
        throw std::invalid_argument("synthetic spec: bad noise/signal parameters");
}

}  // namespace

CohortDataset generate_synthetic_cohort(const SyntheticSpec& spec, uint64_t seed) {
    validate_spec(spec);
    const SynthModel model = make_model(spec, seed);
    const int L = spec.latent_dim;

    CohortDataset out;
    out.gene_names.reserve(spec.n_genes);
    for (int g = 0; g < spec.n_genes; ++g) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "G%04d", g);
        out.gene_names.push_back(buf);
    }
    out.provenance = "synthetic seed=" + std::to_string(seed);

    for (int i = 0; i < spec.n_patients; ++i) {
        Rng rng(Rng::mix(seed, 1000 + static_cast<uint64_t>(i)));
        PatientRecord rec;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "P%04d", i);
            rec.id = buf;
        }

        std::vector<double> z(L);
        for (double& v : z) v = rng.normal();

        std::vector<double> genes(spec.n_genes);
        for (int g = 0; g < spec.n_genes; ++g) {
            const double load = g < L ? model.gene_load[g] * z[g] : 0.0;
            genes[g] = softplus(model.gene_base[g] + load + spec.noise * rng.normal()) *
                       model.gene_scale[g];
        }
        rec.genes = std::move(genes);

        std::vector<double> deep(spec.n_deep);
        for (int d = 0; d < spec.n_deep; ++d) {
            double s = 0.0;
            for (int j = 0; j < L; ++j) s += model.deep_load(d, j) * z[j];
            deep[d] = s + spec.noise * rng.normal();
        }
        rec.deep_features = std::move(deep);

        rec.recurrence = rng.bernoulli(sigmoid(spec.signal_strength * dot(model.w, z)));

        // Texture parameters are affine in z, then clamped to sane ranges.
        const int blob_count =
            std::clamp(static_cast<int>(std::lround(4.0 + 2.0 * dot(model.u_count, z))), 1, 9);
        const double amplitude = std::clamp(90.0 + 35.0 * dot(model.u_amp, z), 20.0, 150.0);
        const double blob_radius = std::clamp(5.0 + 1.5 * dot(model.u_radius, z), 2.0, 9.0);

        const int S = spec.dim_slices, R = spec.dim_rows, C = spec.dim_cols;
        const double cz = S / 2.0 + rng.uniform(-0.05, 0.05) * S;
        const double cy = R / 2.0 + rng.uniform(-0.08, 0.08) * R;
        const double cx = C / 2.0 + rng.uniform(-0.08, 0.08) * C;
        const double rz = std::max(1.5, rng.uniform(0.18, 0.30) * S);
        const double ry = rng.uniform(0.16, 0.25) * R;
        const double rx = rng.uniform(0.16, 0.25) * C;

        rec.mask.voxels = Grid3<uint8_t>(S, R, C, 0);
        for (int s = 0; s < S; ++s)
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) {
                    const double dz = (s - cz) / rz, dy = (r - cy) / ry, dx = (c - cx) / rx;
                    if (dz * dz + dy * dy + dx * dx <= 1.0) rec.mask.voxels(s, r, c) = 1;
                }

        struct Blob {
            double s, r, c, sign;
        };
        std::vector<Blob> blobs;
        for (int b = 0; b < blob_count; ++b) {
            Blob bl;
            bl.s = cz + rng.uniform(-0.6, 0.6) * rz;
            bl.r = cy + rng.uniform(-0.7, 0.7) * ry;
            bl.c = cx + rng.uniform(-0.7, 0.7) * rx;
            bl.sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            blobs.push_back(bl);
        }

        rec.volume.spacing = Spacing{1.0, 1.0, 1.0};
        rec.volume.voxels = Grid3<int16_t>(S, R, C, -800);
        const double r2 = blob_radius * blob_radius;
        for (int s = 0; s < S; ++s)
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) {
                    if (!rec.mask.voxels(s, r, c)) continue;
                    double v = 20.0;
                    for (const Blob& bl : blobs) {
                        const double ds = 2.0 * (s - bl.s), dr = r - bl.r, dc = c - bl.c;
                        v += bl.sign * amplitude *
                             std::exp(-(ds * ds + dr * dr + dc * dc) / (2.0 * r2));
                    }
                    v += 8.0 * rng.normal();  // fine-grained texture
                    v = std::clamp(v, -100.0, 200.0);
                    rec.volume.voxels(s, r, c) = static_cast<int16_t>(std::lround(v));
                }

        out.records.push_back(std::move(rec));
    }
    return out;
}

Matrix synthetic_latents(const SyntheticSpec& spec, uint64_t seed) {
    validate_spec(spec);
    Matrix z(spec.n_patients, spec.latent_dim);
    for (int i = 0; i < spec.n_patients; ++i) {
        Rng rng(Rng::mix(seed, 1000 + static_cast<uint64_t>(i)));
        for (int j = 0; j < spec.latent_dim; ++j) z(i, j) = rng.normal();
    }
    return z;
}

void save_cohort_dir(const CohortDataset& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    CsvTable labels;
    labels.header = {"patient_id", "recurrence"};
    GeneExpressionTable genes;
    genes.gene_names = cohort.gene_names;
    genes.values = Matrix(static_cast<int>(cohort.records.size()),
                          static_cast<int>(cohort.gene_names.size()));
    CsvTable deep;
    bool any_deep = false;

    for (size_t i = 0; i < cohort.records.size(); ++i) {
        const auto& rec = cohort.records[i];
        save_volume(rec.volume, dir / (rec.id + ".vol"));
        save_mask(rec.mask, dir / (rec.id + ".msk"));
        labels.rows.push_back(
            {rec.id, rec.recurrence ? std::to_string(*rec.recurrence) : std::string{}});
        genes.patient_ids.push_back(rec.id);
        if (rec.genes)
            for (size_t g = 0; g < rec.genes->size(); ++g)
                genes.values(static_cast<int>(i), static_cast<int>(g)) = (*rec.genes)[g];
        if (rec.deep_features) {
            any_deep = true;
            if (deep.header.empty()) {
                deep.header.push_back("patient_id");
                for (size_t d = 0; d < rec.deep_features->size(); ++d)
                    deep.header.push_back("deep_" + std::to_string(d));
            }
            std::vector<std::string> row{rec.id};
            for (double v : *rec.deep_features) row.push_back(format_double(v));
            deep.rows.push_back(std::move(row));
        }
    }
    write_csv(labels, dir / "labels.csv");
    save_gene_table(genes, dir / "genes.csv");
    if (any_deep) write_csv(deep, dir / "deep_features.csv");

    std::ofstream meta(dir / "cohort.json");
    meta << "{\n  \"provenance\": \"" << cohort.provenance << "\",\n  \"patients\": "
         << cohort.records.size() << ",\n  \"genes\": " << cohort.gene_names.size() << "\n}\n";
}

CohortDataset load_cohort_dir(const std::filesystem::path& dir) {
    const CsvTable labels = read_csv(dir / "labels.csv");
    if (labels.header.size() < 2 || labels.header[0] != "patient_id" ||
        labels.header[1] != "recurrence")
        throw std::runtime_error("labels.csv must have header patient_id,recurrence");
    const GeneExpressionTable genes = load_gene_table(dir / "genes.csv");

    std::unordered_map<std::string, std::vector<double>> deep_map;
    const auto deep_path = dir / "deep_features.csv";
    if (std::filesystem::exists(deep_path)) {
        const DeepFeatureTable deep = load_deep_features(deep_path);
        for (size_t i = 0; i < deep.patient_ids.size(); ++i) deep_map[deep.patient_ids[i]] = deep.values[i];
    }

    std::vector<PatientRecord> records;
    for (const auto& row : labels.rows) {
        if (row.size() < 2) throw std::runtime_error("ragged labels.csv row");
        PatientRecord rec;
        rec.id = row[0];
        const auto vol_path = dir / (rec.id + ".vol");
        const auto msk_path = dir / (rec.id + ".msk");
        if (!std::filesystem::exists(vol_path)) continue;  // screened out later anyway
        rec.volume = load_volume(vol_path);
        if (std::filesystem::exists(msk_path)) rec.mask = load_mask(msk_path);
        if (!row[1].empty()) {
            if (row[1] != "0" && row[1] != "1")
                throw std::runtime_error("recurrence must be 0 or 1, got '" + row[1] + "'");
            rec.recurrence = row[1] == "1" ? 1 : 0;
        }
        if (auto it = deep_map.find(rec.id); it != deep_map.end()) rec.deep_features = it->second;
        records.push_back(std::move(rec));
    }
    CohortDataset out = screen_cohort(std::move(records), genes);
    out.provenance = "dir:" + dir.string();
    return out;
}

}  // namespace ggr
