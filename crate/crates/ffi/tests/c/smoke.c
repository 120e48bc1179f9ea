#include <math.h>
#include <stdio.h>
#include "wasscc.h"

#define CHECK(cond)                                             \
    do {                                                        \
        if (!(cond)) {                                          \
            fprintf(stderr, "check failed: %s\n", #cond);       \
            return 1;                                           \
        }                                                       \
    } while (0)

int main(void) {
    double q = 0.0;
    CHECK(wasscc_std_quantile(0.975, &q) == WASSCC_STATUS_OK);
    CHECK(fabs(q - 1.959963984540054) < 1e-12);
    CHECK(wasscc_std_quantile(1.5, &q) == WASSCC_STATUS_INVALID_ARGUMENT);
    CHECK(wasscc_last_error() != NULL);

    WassccPortfolio *p = NULL;
    CHECK(wasscc_portfolio_paper(0.15, 0.005, &p) == WASSCC_STATUS_OK);
    size_t n = wasscc_portfolio_n_assets(p);
    CHECK(n == 11);
    double alloc[11];
    double objective = 0.0;
    CHECK(wasscc_portfolio_solve(p, WASSCC_MODE_OPTIMISTIC, alloc, n, &objective) == WASSCC_STATUS_OK);
    double total = 0.0;
    for (size_t i = 0; i < n; i++) total += alloc[i];
    CHECK(fabs(total - 1.0) < 1e-8);
    WassccCertificate cert;
    CHECK(wasscc_portfolio_certify(p, WASSCC_MODE_PESSIMISTIC, alloc, n, 1000, 7, &cert) == WASSCC_STATUS_OK);
    CHECK(cert.n_samples == 1000 && cert.seed == 7);
    wasscc_portfolio_free(p);

    printf("ok %s\n", wasscc_version());
    return 0;
}
