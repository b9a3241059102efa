#include <math.h>
#include <stdio.h>
#include <string.h>
#include "coevo.h"

int main(void) {
    double x = 0.0;
    if (coevo_crossover_rate(6, 0.0, 1.0, 10, &x) != COEVO_STATUS_OK) return 1;
    if (fabs(x - 0.5868241) > 1e-6) return 2;
    if (coevo_test_discrimination(1.5, &x) != COEVO_STATUS_INVALID_ARGUMENT) return 3;
    if (coevo_last_error_message() == NULL) return 4;
    const uint8_t bits[] = {1, 1, 0, 1, 1, 0, 0, 1, 1};
    double conf[3];
    if (coevo_program_confidence(bits, 3, 3, conf) != COEVO_STATUS_OK) return 5;
    if (fabs(conf[0] - 2.0 * sqrt(2.0)) > 1e-12 || fabs(conf[2] - 2.0) > 1e-12) return 6;
    CoevoEngine *engine = NULL;
    if (coevo_engine_new("[engine]\nmax_iter = 0\n", &engine) == COEVO_STATUS_OK) return 7;
    if (coevo_engine_new(NULL, &engine) != COEVO_STATUS_OK) return 8;
    coevo_engine_free(engine);
    printf("ok %s\n", coevo_version());
    return 0;
}
