#include <math.h>
#include <stdio.h>
#include <string.h>

#include "whichway.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    WwmApparatus a;
    CHECK(wwm_apparatus_reference(&a) == WWM_STATUS_OK);
    CHECK(fabs(a.slit_separation - 3e-3) < 1e-15);

    double b = 0.0;
    CHECK(wwm_bound(0.0, &b) == WWM_STATUS_OK);
    CHECK(fabs(b - 2.0 / M_PI) < 1e-15);
    CHECK(wwm_bound(-0.5, &b) == WWM_STATUS_DOMAIN);

    char msg[256];
    size_t needed = 0;
    CHECK(wwm_last_error_message(msg, sizeof msg, &needed) == WWM_STATUS_OK);
    CHECK(needed > 1 && strlen(msg) + 1 == needed);

    double p = 1.0;
    CHECK(wwm_invert_counts(400.0, 400.0, 336.0, &a, &p) == WWM_STATUS_OK);
    CHECK(p == 0.0);
    CHECK(wwm_invert_counts(0.0, 0.0, 336.0, &a, &p) == WWM_STATUS_EMPTY_PIXEL);

    WwmField *field = NULL;
    CHECK(wwm_field_new(&a, NULL, 0, M_PI, &field) == WWM_STATUS_OK);
    double v = 0.0;
    CHECK(wwm_field_momentum(field, 0.0, 8.612, &p, &v) == WWM_STATUS_NODE);
    CHECK(wwm_field_momentum(field, 1e-3, 8.612, &p, &v) == WWM_STATUS_OK);
    double q = 0.0;
    CHECK(wwm_field_momentum(field, -1e-3, 8.612, &q, NULL) == WWM_STATUS_OK);
    CHECK(fabs(p + q) < 1e-12);
    wwm_field_free(field);

    double planes[] = {1.445, 3.0, 5.0, 8.612};
    WwmSimulation *sim = NULL;
    CHECK(wwm_simulation_new(&a, planes, 4, 20, 0, &sim) == WWM_STATUS_OK);
    size_t n = 0, np = 0;
    CHECK(wwm_simulation_shape(sim, &n, &np) == WWM_STATUS_OK);
    CHECK(n == 40 && np == 4);
    double m = 0.0;
    CHECK(wwm_simulation_mean_abs(sim, 0, 0.5, 0.1, &m) == WWM_STATUS_OK);
    CHECK(m > 0.0 && m < 0.15);
    CHECK(wwm_simulation_position(sim, true, 40, 0, &m) == WWM_STATUS_INVALID_ARGUMENT);
    wwm_simulation_free(sim);

    printf("ok\n");
    return 0;
}
