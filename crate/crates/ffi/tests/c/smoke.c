#include <stdio.h>
#include "modfield.h"

int main(int argc, char **argv) {
    if (argc != 3) return 10;
    MfModel *model = NULL;
    MfCodebook *book = NULL;
    if (mf_model_load("/nonexistent/model.modf", &model) != MF_STATUS_IO) return 11;
    if (mf_last_error_message() == NULL) return 12;
    if (mf_model_load(argv[1], &model) != MF_STATUS_OK) return 13;
    if (mf_codebook_load(argv[2], &book) != MF_STATUS_OK) return 14;

    MfModelDims dims;
    mf_model_dims(model, &dims);
    double p[2] = {5.25, 17.5};
    double out[3];
    if (dims.output_dim > 3) return 15;
    if (mf_decode_point(model, book, p, 2, out, dims.output_dim) != MF_STATUS_OK) return 16;
    if (mf_decode_point(model, book, p, 3, out, dims.output_dim) != MF_STATUS_INVALID_ARGUMENT) return 17;

    printf("%zu %zu %zu", dims.input_dim, dims.output_dim, dims.latent_dim);
    for (size_t i = 0; i < dims.output_dim; i++) printf(" %.17g", out[i]);
    printf("\n");
    mf_codebook_free(book);
    mf_model_free(model);
    return 0;
}
