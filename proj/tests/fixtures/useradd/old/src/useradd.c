#include <pwd.h>
#include <shadow.h>
#include <stddef.h>

/*
 * Return 1 if the named user has an entry in the password database.
 */
static int user_exists (const char *name)
{
	const struct passwd *pw;

	if (NULL == name) {
		return 0;
	}

	pw = getspnam (name);

	return NULL != pw;
}
