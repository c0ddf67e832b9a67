#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ggr/array.hpp"

namespace ggr {

struct Spacing {
    double z = 1.0, y = 1.0, x = 1.0;
};

// CT volume in Hounsfield units. File format GGRVOL v1, see docs/formats.md.
struct CtVolume {
    Grid3<int16_t> voxels;  // (slices, rows, cols)
    Spacing spacing;
};

// Binary tumor mask with the same dims as its volume. Format GGRMSK v1.
struct TumorMask {
    Grid3<uint8_t> voxels;  // values in {0,1}
    size_t nonzero_count() const;
};

// Patients x genes FPKM matrix. Missing cells are stored as NaN.
struct GeneExpressionTable {
    std::vector<std::string> patient_ids;
    std::vector<std::string> gene_names;
    Matrix values;  // |patient_ids| x |gene_names|

    bool is_missing(int patient, int gene) const;
    int patient_index(const std::string& id) const;  // -1 if absent
};

struct PatientRecord {
    std::string id;
    CtVolume volume;
    TumorMask mask;
    std::optional<std::vector<double>> genes;
    std::optional<int> recurrence;  // 0/1
    std::optional<std::vector<double>> deep_features;
};

struct CohortDataset {
    std::vector<PatientRecord> records;
    std::vector<std::string> gene_names;
    std::string provenance;

    Matrix gene_matrix() const;          // records x genes (requires all present)
    std::vector<int> labels() const;     // requires all present
};

CtVolume load_volume(const std::filesystem::path& path);
void save_volume(const CtVolume& vol, const std::filesystem::path& path);
TumorMask load_mask(const std::filesystem::path& path);
void save_mask(const TumorMask& mask, const std::filesystem::path& path);

// Gene CSV: header "patient_id,<gene names...>"; missing cells are the
// literal tokens "NA", "N/A" or the empty string. Negative values are
// rejected (FPKM is non-negative).
GeneExpressionTable load_gene_table(const std::filesystem::path& path);
void save_gene_table(const GeneExpressionTable& table, const std::filesystem::path& path);

// Drops patients lacking a nonempty mask, a gene row, or a recurrence label;
// drops every gene column with a missing cell across retained patients.
// Record order is preserved; screening is idempotent.
CohortDataset screen_cohort(std::vector<PatientRecord> records, const GeneExpressionTable& genes);
CohortDataset screen_cohort(CohortDataset cohort);  // re-screen using attached gene vectors

struct SyntheticSpec {
    int n_patients = 200;
    int n_genes = 200;
    int latent_dim = 5;         // one planted informative gene per latent axis
    double signal_strength = 4.0;
    double noise = 0.5;
    int dim_slices = 12, dim_rows = 64, dim_cols = 64;
    int n_deep = 64;            // deep-feature vector width emitted per patient
};

// Planted-signal cohort for desk-scale verification. Latent z drives the
// informative genes, the lesion texture parameters, the deep features and
// the recurrence probability; everything is a pure function of (spec, seed).
CohortDataset generate_synthetic_cohort(const SyntheticSpec& spec, uint64_t seed);

// True latent coordinates of a generated cohort, for test oracles only.
Matrix synthetic_latents(const SyntheticSpec& spec, uint64_t seed);

// Cohort directory layout (flat): <id>.vol, <id>.msk, labels.csv, genes.csv,
// deep_features.csv, cohort.json. Loading applies screen_cohort.
void save_cohort_dir(const CohortDataset& cohort, const std::filesystem::path& dir);
CohortDataset load_cohort_dir(const std::filesystem::path& dir);

}  // namespace ggr
