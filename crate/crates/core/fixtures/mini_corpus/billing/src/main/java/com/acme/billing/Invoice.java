package com.acme.billing;

import com.acme.billing.util.Money;
import com.acme.billing.util.Currency;

public class Invoice {
    private final Account account;
    private final Money amount;
    private boolean paid;

    public Invoice(Account account, Money amount) {
        this.account = account;
        this.amount = amount;
    }

    public void markPaid() {
        paid = true;
    }

    public boolean isPaid() {
        return paid;
    }

    public String describe() {
        return account.getAccountId() + ": " + amount.format(Currency.USD);
    }
}
