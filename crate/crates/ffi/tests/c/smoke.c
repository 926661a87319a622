#include <math.h>
#include <stdio.h>
#include "sobolev_erm.h"

#define CHECK(call)                                                              \
    do {                                                                         \
        SeStatus status_ = (call);                                               \
        if (status_ != SE_STATUS_OK) {                                           \
            const char *msg_ = se_last_error();                                  \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)status_,         \
                    msg_ ? msg_ : "");                                           \
            return 1;                                                            \
        }                                                                        \
    } while (0)

int main(void) {
    SeBasis *basis = NULL;
    CHECK(se_basis_new(1, 1.0, 9, &basis));
    if (se_basis_size(basis) != 9) return 2;

    /* x_{t+1} = 0.5 x_t sampled on a grid, no noise. */
    double x[200], y[200];
    for (int i = 0; i < 200; ++i) {
        x[i] = -0.95 + 1.9 * i / 199.0;
        y[i] = 0.5 * x[i];
    }
    SeCoeffs *fit = NULL;
    CHECK(se_fit_laplacian(basis, x, y, 200, 2.0, 1e-8, 1.0, &fit));
    double at = 0.3, value = 0.0;
    CHECK(se_coeffs_eval(fit, &at, 1, &value, 1));
    if (fabs(value - 0.15) > 1e-2) {
        fprintf(stderr, "fit at 0.3 = %g\n", value);
        return 3;
    }

    SeParams params = se_params_default();
    SeRateBound bound;
    CHECK(se_rate_bound(SE_BOUND_KIND_EXPECTATION, 1e4, 1e-3, &params, &bound));
    if (bound.c_fast != 2.0) return 4;

    if (se_rate_bound(SE_BOUND_KIND_EXPECTATION, 1e4, 0.0, &params, &bound) != SE_STATUS_DOMAIN) return 5;
    if (se_last_error() == NULL) return 6;

    se_coeffs_free(fit);
    se_basis_free(basis);
    printf("ok %s\n", se_version());
    return 0;
}
